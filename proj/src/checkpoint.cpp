#include "claimlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "claimlab/io.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace claimlab::nn {

namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'U', 'L', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

json params_header(const std::vector<const Parameter*>& params) {
  json list = json::array();
  for (const Parameter* p : params) {
    list.push_back({{"name", p->name}, {"rows", p->value.rows}, {"cols", p->value.cols}});
  }
  return list;
}

void write_file(const json& header, const std::vector<const Parameter*>& params,
                const std::string& path) {
  std::string blob(kMagic, 4);
  const std::string header_str = header.dump();
  append_u32(blob, kVersion);
  append_u32(blob, static_cast<std::uint32_t>(header_str.size()));
  blob += header_str;
  for (const Parameter* p : params) {
    const char* bytes = reinterpret_cast<const char*>(p->value.data.data());
    blob.append(bytes, p->value.size() * sizeof(double));
  }
  io::atomic_write(path, blob);
}

struct RawCheckpoint {
  json header;
  std::string payload;  // raw f64 arrays
};

RawCheckpoint read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorKind::io, "cannot open " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < 12) {
    throw CheckpointError(CheckpointErrorKind::bad_magic, "file too short: " + path);
  }
  if (std::memcmp(blob.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointErrorKind::bad_magic, "bad magic bytes in " + path);
  }
  std::uint32_t version = 0, header_len = 0;
  std::memcpy(&version, blob.data() + 4, 4);
  std::memcpy(&header_len, blob.data() + 8, 4);
  if (version != kVersion) {
    throw CheckpointError(CheckpointErrorKind::bad_version,
                          "unsupported checkpoint version " + std::to_string(version));
  }
  if (12 + static_cast<std::size_t>(header_len) > blob.size()) {
    throw CheckpointError(CheckpointErrorKind::bad_header, "truncated header in " + path);
  }
  RawCheckpoint raw;
  raw.header = json::parse(blob.substr(12, header_len), nullptr, false);
  if (raw.header.is_discarded() || !raw.header.is_object()) {
    throw CheckpointError(CheckpointErrorKind::bad_header, "unparsable header in " + path);
  }
  raw.payload = blob.substr(12 + header_len);
  return raw;
}

void load_params(const RawCheckpoint& raw, const std::vector<Parameter*>& params,
                 const std::string& path) {
  const json& list = raw.header.at("params");
  if (!list.is_array() || list.size() != params.size()) {
    throw CheckpointError(CheckpointErrorKind::shape_mismatch,
                          "parameter count mismatch in " + path);
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& entry = list[i];
    Parameter& p = *params[i];
    if (entry.at("name").get<std::string>() != p.name ||
        entry.at("rows").get<std::size_t>() != p.value.rows ||
        entry.at("cols").get<std::size_t>() != p.value.cols) {
      throw CheckpointError(CheckpointErrorKind::shape_mismatch,
                            "parameter " + p.name + " mismatch in " + path);
    }
    const std::size_t bytes = p.value.size() * sizeof(double);
    if (offset + bytes > raw.payload.size()) {
      throw CheckpointError(CheckpointErrorKind::io, "truncated payload in " + path);
    }
    std::memcpy(p.value.data.data(), raw.payload.data() + offset, bytes);
    offset += bytes;
  }
  if (offset != raw.payload.size()) {
    throw CheckpointError(CheckpointErrorKind::io, "trailing bytes in " + path);
  }
}

StackConfig stack_config_of(const json& arch) {
  StackConfig cfg;
  cfg.vocab = arch.at("vocab").get<std::size_t>();
  cfg.embed_dim = arch.at("embed").get<std::size_t>();
  cfg.hidden_dim = arch.at("hidden").get<std::size_t>();
  cfg.num_layers = arch.at("layers").get<std::size_t>();
  cfg.dropout = arch.at("dropout").get<double>();
  return cfg;
}

json arch_json(const StackConfig& cfg) {
  return {{"vocab", cfg.vocab},   {"embed", cfg.embed_dim}, {"hidden", cfg.hidden_dim},
          {"layers", cfg.num_layers}, {"dropout", cfg.dropout}};
}

LstmStack stack_shell(const StackConfig& cfg) {
  LstmStack stack;
  stack.cfg = cfg;
  stack.embedding = Parameter("embedding", cfg.vocab, cfg.embed_dim);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    stack.layers.emplace_back("lstm" + std::to_string(l),
                              l == 0 ? cfg.embed_dim : cfg.hidden_dim, cfg.hidden_dim);
  }
  return stack;
}

Stage parse_stage(const json& header, const std::string& path) {
  auto stage = stage_from_string(header.at("stage").get<std::string>());
  if (!stage) {
    throw CheckpointError(CheckpointErrorKind::bad_header, "unknown stage tag in " + path);
  }
  return *stage;
}

std::uint64_t parse_vocab_hash(const json& header, const std::string& path) {
  const std::string hex = header.at("vocab_hash").get<std::string>();
  try {
    return std::stoull(hex, nullptr, 16);
  } catch (const std::exception&) {
    throw CheckpointError(CheckpointErrorKind::bad_header, "bad vocab hash in " + path);
  }
}

}  // namespace

const char* to_string(Stage s) {
  switch (s) {
    case Stage::general: return "general";
    case Stage::imho: return "imho";
    case Stage::classifier: return "classifier";
  }
  return "?";
}

std::optional<Stage> stage_from_string(std::string_view s) {
  if (s == "general") return Stage::general;
  if (s == "imho") return Stage::imho;
  if (s == "classifier") return Stage::classifier;
  return std::nullopt;
}

const char* to_string(CheckpointErrorKind k) {
  switch (k) {
    case CheckpointErrorKind::io: return "io";
    case CheckpointErrorKind::bad_magic: return "bad_magic";
    case CheckpointErrorKind::bad_version: return "bad_version";
    case CheckpointErrorKind::bad_header: return "bad_header";
    case CheckpointErrorKind::shape_mismatch: return "shape_mismatch";
    case CheckpointErrorKind::vocab_mismatch: return "vocab_mismatch";
    case CheckpointErrorKind::stage_mismatch: return "stage_mismatch";
  }
  return "?";
}

void save_checkpoint(const LanguageModel& model, Stage stage, std::uint64_t vocab_hash,
                     const std::string& path) {
  if (stage == Stage::classifier) {
    throw CheckpointError(CheckpointErrorKind::stage_mismatch,
                          "a language model cannot carry the classifier stage tag");
  }
  json arch = arch_json(model.stack.cfg);
  arch["tied"] = model.tie_weights;
  json header = {{"stage", to_string(stage)},
                 {"model", "lm"},
                 {"vocab_hash", io::hex64(vocab_hash)},
                 {"arch", arch},
                 {"params", params_header(model.parameters())}};
  write_file(header, model.parameters(), path);
}

void save_checkpoint(const ulmfit::Classifier& clf, std::uint64_t vocab_hash,
                     const std::string& path) {
  json arch = arch_json(clf.stack.cfg);
  arch["head_hidden"] = clf.w1.value.rows;
  arch["final_state_only"] = clf.final_state_only;
  json header = {{"stage", to_string(Stage::classifier)},
                 {"model", "classifier"},
                 {"vocab_hash", io::hex64(vocab_hash)},
                 {"arch", arch},
                 {"params", params_header(clf.parameters())}};
  write_file(header, clf.parameters(), path);
}

CheckpointInfo peek_checkpoint(const std::string& path) {
  RawCheckpoint raw = read_file(path);
  CheckpointInfo info;
  try {
    info.stage = parse_stage(raw.header, path);
    info.vocab_hash = parse_vocab_hash(raw.header, path);
    info.is_classifier = raw.header.at("model").get<std::string>() == "classifier";
  } catch (const json::exception&) {
    throw CheckpointError(CheckpointErrorKind::bad_header, "incomplete header in " + path);
  }
  return info;
}

LanguageModel load_lm_checkpoint(const std::string& path, Stage* stage_out,
                                 std::optional<std::uint64_t> expect_vocab_hash) {
  RawCheckpoint raw = read_file(path);
  try {
    if (raw.header.at("model").get<std::string>() != "lm") {
      throw CheckpointError(CheckpointErrorKind::stage_mismatch,
                            path + " holds a classifier, not a language model");
    }
    const Stage stage = parse_stage(raw.header, path);
    const std::uint64_t vocab_hash = parse_vocab_hash(raw.header, path);
    if (expect_vocab_hash && *expect_vocab_hash != vocab_hash) {
      throw CheckpointError(CheckpointErrorKind::vocab_mismatch,
                            "vocabulary hash mismatch for " + path);
    }
    const json& arch = raw.header.at("arch");
    LanguageModel model;
    model.stack = stack_shell(stack_config_of(arch));
    model.tie_weights = arch.at("tied").get<bool>();
    if (!model.tie_weights) {
      model.decoder_w =
          Parameter("decoder.w", model.stack.cfg.vocab, model.stack.cfg.hidden_dim);
    }
    model.decoder_b = Parameter("decoder.b", 1, model.stack.cfg.vocab);
    load_params(raw, model.parameters(), path);
    if (stage_out) *stage_out = stage;
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointErrorKind::bad_header,
                          "incomplete header in " + path + ": " + e.what());
  }
}

ulmfit::Classifier load_classifier_checkpoint(const std::string& path,
                                              std::optional<std::uint64_t> expect_vocab_hash) {
  RawCheckpoint raw = read_file(path);
  try {
    if (raw.header.at("model").get<std::string>() != "classifier") {
      throw CheckpointError(CheckpointErrorKind::stage_mismatch,
                            path + " holds a language model, not a classifier");
    }
    const std::uint64_t vocab_hash = parse_vocab_hash(raw.header, path);
    if (expect_vocab_hash && *expect_vocab_hash != vocab_hash) {
      throw CheckpointError(CheckpointErrorKind::vocab_mismatch,
                            "vocabulary hash mismatch for " + path);
    }
    const json& arch = raw.header.at("arch");
    ulmfit::Classifier clf;
    clf.stack = stack_shell(stack_config_of(arch));
    clf.final_state_only = arch.at("final_state_only").get<bool>();
    const std::size_t head_hidden = arch.at("head_hidden").get<std::size_t>();
    clf.w1 = Parameter("head.w1", head_hidden, clf.pooled_dim());
    clf.b1 = Parameter("head.b1", 1, head_hidden);
    clf.w2 = Parameter("head.w2", 2, head_hidden);
    clf.b2 = Parameter("head.b2", 1, 2);
    load_params(raw, clf.parameters(), path);
    return clf;
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointErrorKind::bad_header,
                          "incomplete header in " + path + ": " + e.what());
  }
}

}  // namespace claimlab::nn
