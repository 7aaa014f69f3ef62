#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

// Evaluation scoring: joint and per-target MAE / RMSE / R2 over paired
// (truth, prediction) records, plus the CSV / JSON emitters for them.
namespace atcline {

// One evaluated sample. Times in seconds; onset_t identifies the maneuver the
// prediction belongs to when rows are exported.
struct EvalRecord {
  std::string callsign;
  double onset_t = 0.0;
  double offset_true = 0.0;
  double duration_true = 0.0;
  double offset_hat = 0.0;
  double duration_hat = 0.0;
};

struct EvaluationSet {
  std::vector<EvalRecord> records;

  // N >= 1 and every value finite.
  void validate() const;
};

// Overall metrics pool both targets' errors (2N terms); per-target metrics use
// the standard single-target forms. An R2 slot is empty when the evaluation
// cannot define it: fewer than two samples, or zero truth variance in scope.
struct MetricsReport {
  double mae_overall = 0.0;
  double rmse_overall = 0.0;
  std::optional<double> r2_overall;
  double mae_offset = 0.0;
  double mae_duration = 0.0;
  double rmse_offset = 0.0;
  double rmse_duration = 0.0;
  std::optional<double> r2_offset;
  std::optional<double> r2_duration;
};

// Fixed summation order over records, so reports are bit-stable regardless of
// how the records were produced.
MetricsReport compute_metrics(const EvaluationSet& ev);

// Unwraps an R2 slot; an evaluation with zero truth variance carries none.
double require_r2(const std::optional<double>& r2, const char* scope);

// Header `callsign,onset_t,offset_hat,duration_hat,offset_true,duration_true`
// then one row per record, doubles formatted to round-trip exactly.
std::string predictions_csv(const EvaluationSet& ev);

// Report keys in declaration order; undefined R2 slots emitted as null.
nlohmann::ordered_json metrics_json(const MetricsReport& r);

}  // namespace atcline
