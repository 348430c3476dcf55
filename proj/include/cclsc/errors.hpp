#pragma once

#include <stdexcept>
#include <string>

namespace cclsc {

// Every error carries a short machine-readable category; the CLI prints it
// as the first token of its one-line failure message.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define CCLSC_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(tag, what) {}        \
  }

CCLSC_DEFINE_ERROR(ConfigError, "config");
CCLSC_DEFINE_ERROR(InputError, "input");
CCLSC_DEFINE_ERROR(DegenerateEmbeddingError, "degenerate-embedding");
CCLSC_DEFINE_ERROR(DegenerateClassifierError, "degenerate-classifier");
CCLSC_DEFINE_ERROR(TrainingDivergenceError, "training-divergence");
CCLSC_DEFINE_ERROR(EmptyPositiveSetError, "empty-positive-set");
CCLSC_DEFINE_ERROR(UndefinedRiskError, "undefined-risk");
CCLSC_DEFINE_ERROR(FormatError, "format");
CCLSC_DEFINE_ERROR(IoError, "io");

#undef CCLSC_DEFINE_ERROR

}  // namespace cclsc
