#pragma once

#include <stdexcept>
#include <string>

namespace kps {

enum class Errc {
  NonSymmetric,
  NoConvergence,
  DegenerateImage,
  IndexOutOfRange,
  ShapeMismatch,
  EmptyDataset,
  BadMagic,
  TruncatedFile,
  InvalidTarget,
  InvalidArgument,
  EmptyTraining,
  SingleClassTraining,
  UntrainedModel,
  CountMismatch,
  InvalidDims,
  InsufficientSamples,
  InsufficientPairs,
  IoFailure,
  BatchFailure,
};

const char* errc_name(Errc c);

/// All library failures are reported as Error; code() distinguishes them.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace kps
