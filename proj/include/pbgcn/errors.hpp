#ifndef PBGCN_ERRORS_HPP
#define PBGCN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pbgcn {

/// Error codes surfaced on the CLI as `ERROR <code>: <message>`.
enum class errc {
  // graph / partition
  InvalidGraph,
  UncoveredVertex,
  UncoveredEdge,
  DisconnectedPart,
  NoSharedVertex,
  ZeroDegreeVertex,
  VertexNotInPart,
  // signals
  EmptyReferenceSet,
  ShapeMismatch,
  // tensor
  InvalidLabel,
  NonScalarLoss,
  // training
  EpochOutOfRange,
  MissingGrad,
  EmptyDataset,
  DivergedLoss,
  // dataio
  MalformedHeader,
  JointCountMismatch,
  NonFiniteCoordinate,
  TooManyBodies,
  PatternMismatch,
  EmptySide,
  InvalidSpec,
  // eval / cli
  EmptyEvalSet,
  IOError,
  UnknownSubcommand,
  ConfigParseError,
  ConfigMismatch,
  UnknownClassCount,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  errc code() const { return code_; }
  const char* code_name() const { return errc_name(code_); }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, errc code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace pbgcn

#endif
