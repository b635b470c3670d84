#ifndef W2A_NUMERICS_ERRORS_H_
#define W2A_NUMERICS_ERRORS_H_

#include <stdexcept>
#include <string>

namespace w2a {

// Root of every error thrown by the library. `kind()` is a short stable tag
// used by the command-line tools for machine-parseable failure lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define W2A_DEFINE_ERROR(Name, tag)                                    \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(tag, what) {}       \
  }

W2A_DEFINE_ERROR(DimensionError, "dimension");
W2A_DEFINE_ERROR(ContractError, "contract");
W2A_DEFINE_ERROR(DegenerateLatentError, "degenerate_latent");
W2A_DEFINE_ERROR(ConfigError, "config");
W2A_DEFINE_ERROR(AlignmentError, "alignment");
W2A_DEFINE_ERROR(ChunkingError, "chunking");
W2A_DEFINE_ERROR(PlannerError, "planner");
W2A_DEFINE_ERROR(SchemaError, "schema");
W2A_DEFINE_ERROR(TraceError, "trace");
W2A_DEFINE_ERROR(FrozenError, "frozen");
W2A_DEFINE_ERROR(FormatError, "format");
W2A_DEFINE_ERROR(IoError, "io");
W2A_DEFINE_ERROR(DependencyError, "dependency");

#undef W2A_DEFINE_ERROR

}  // namespace w2a

#endif  // W2A_NUMERICS_ERRORS_H_
