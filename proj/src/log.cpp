#include "kps/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "kps/error.hpp"

namespace kps {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::NonSymmetric: return "NonSymmetric";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::DegenerateImage: return "DegenerateImage";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::InvalidTarget: return "InvalidTarget";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EmptyTraining: return "EmptyTraining";
    case Errc::SingleClassTraining: return "SingleClassTraining";
    case Errc::UntrainedModel: return "UntrainedModel";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::InvalidDims: return "InvalidDims";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::InsufficientPairs: return "InsufficientPairs";
    case Errc::IoFailure: return "IoFailure";
    case Errc::BatchFailure: return "BatchFailure";
  }
  return "UnknownError";
}

} // namespace kps

namespace kps::log {

Level level() {
  static Level lvl = [] {
    const char* env = std::getenv("KP_SHIELD_LOG");
    if (!env) return Level::Error;
    if (std::strcmp(env, "debug") == 0) return Level::Debug;
    if (std::strcmp(env, "info") == 0) return Level::Info;
    return Level::Error;
  }();
  return lvl;
}

void write(Level lvl, const char* fmt, ...) {
  if (int(lvl) > int(level())) return;
  static const char* tag[] = {"error", "info", "debug"};
  std::fprintf(stderr, "[kpshield %s] ", tag[int(lvl)]);
  va_list args;
  va_start(args, fmt);
  std::vfprintf(stderr, fmt, args);
  va_end(args);
  std::fputc('\n', stderr);
}

} // namespace kps::log
