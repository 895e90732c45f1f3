#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "claimlab/nn.hpp"
#include "claimlab/ulmfit.hpp"

namespace claimlab::nn {

enum class Stage { general, imho, classifier };
const char* to_string(Stage s);
std::optional<Stage> stage_from_string(std::string_view s);

enum class CheckpointErrorKind {
  io,
  bad_magic,
  bad_version,
  bad_header,
  shape_mismatch,
  vocab_mismatch,
  stage_mismatch,
};
const char* to_string(CheckpointErrorKind k);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

// File layout: magic "ULMC", little-endian u32 version (1), u32 header
// length, UTF-8 JSON header (architecture, parameter names/shapes in order,
// vocabulary content hash, stage tag), then the raw little-endian f64 arrays
// in header order. Writes are atomic (temp file + rename).

void save_checkpoint(const LanguageModel& model, Stage stage, std::uint64_t vocab_hash,
                     const std::string& path);
void save_checkpoint(const ulmfit::Classifier& clf, std::uint64_t vocab_hash,
                     const std::string& path);

struct CheckpointInfo {
  Stage stage = Stage::general;
  std::uint64_t vocab_hash = 0;
  bool is_classifier = false;
};

CheckpointInfo peek_checkpoint(const std::string& path);

// expect_vocab_hash, when set, is validated against the stored hash.
LanguageModel load_lm_checkpoint(const std::string& path, Stage* stage_out = nullptr,
                                 std::optional<std::uint64_t> expect_vocab_hash = {});
ulmfit::Classifier load_classifier_checkpoint(const std::string& path,
                                              std::optional<std::uint64_t> expect_vocab_hash = {});

}  // namespace claimlab::nn
