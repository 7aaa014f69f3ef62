#pragma once

#include <stdexcept>

// Error types thrown by the pipeline. Each names the condition it reports;
// recoverable per-utterance parse outcomes are not exceptions (see phrase.hpp).
namespace atcline {

#define ATCLINE_DEFINE_ERROR(Name)                      \
  struct Name : std::runtime_error {                    \
    using std::runtime_error::runtime_error;            \
  }

ATCLINE_DEFINE_ERROR(SignalTooShort);
ATCLINE_DEFINE_ERROR(NoCallsign);
ATCLINE_DEFINE_ERROR(IrregularSampling);
ATCLINE_DEFINE_ERROR(BadCoordinate);
ATCLINE_DEFINE_ERROR(UndefinedBearing);
ATCLINE_DEFINE_ERROR(OutOfRange);
ATCLINE_DEFINE_ERROR(EmptyWindow);
ATCLINE_DEFINE_ERROR(TargetMissing);
ATCLINE_DEFINE_ERROR(SchemaMismatch);
ATCLINE_DEFINE_ERROR(NonFinite);
ATCLINE_DEFINE_ERROR(NoData);
ATCLINE_DEFINE_ERROR(SampleDropped);
ATCLINE_DEFINE_ERROR(R2Undefined);
ATCLINE_DEFINE_ERROR(IncompleteEnsemble);
ATCLINE_DEFINE_ERROR(BadSlot);
ATCLINE_DEFINE_ERROR(BadDuration);
ATCLINE_DEFINE_ERROR(BadWindow);
ATCLINE_DEFINE_ERROR(BadConfig);
ATCLINE_DEFINE_ERROR(IoError);

#undef ATCLINE_DEFINE_ERROR

}  // namespace atcline
