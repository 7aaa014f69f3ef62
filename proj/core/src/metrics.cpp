#include "atcline/metrics.hpp"

#include <cmath>

#include "atcline/errors.hpp"
#include "atcline/util.hpp"

namespace atcline {

void EvaluationSet::validate() const {
  if (records.empty()) throw NoData("empty evaluation set");
  for (const auto& r : records) {
    const double vals[] = {r.onset_t, r.offset_true, r.duration_true,
                           r.offset_hat, r.duration_hat};
    for (const double v : vals)
      if (!std::isfinite(v))
        throw NonFinite("non-finite evaluation value for " + r.callsign);
  }
}

MetricsReport compute_metrics(const EvaluationSet& ev) {
  ev.validate();
  const auto& R = ev.records;
  const double n = static_cast<double>(R.size());

  double sae_off = 0.0, sae_dur = 0.0, sse_off = 0.0, sse_dur = 0.0;
  double mean_off = 0.0, mean_dur = 0.0;
  for (const auto& r : R) {
    const double e1 = r.offset_hat - r.offset_true;
    const double e2 = r.duration_hat - r.duration_true;
    sae_off += std::fabs(e1);
    sae_dur += std::fabs(e2);
    sse_off += e1 * e1;
    sse_dur += e2 * e2;
    mean_off += r.offset_true;
    mean_dur += r.duration_true;
  }
  mean_off /= n;
  mean_dur /= n;

  double sst_off = 0.0, sst_dur = 0.0;
  for (const auto& r : R) {
    sst_off += (r.offset_true - mean_off) * (r.offset_true - mean_off);
    sst_dur += (r.duration_true - mean_dur) * (r.duration_true - mean_dur);
  }

  MetricsReport rep;
  rep.mae_offset = sae_off / n;
  rep.mae_duration = sae_dur / n;
  rep.rmse_offset = std::sqrt(sse_off / n);
  rep.rmse_duration = std::sqrt(sse_dur / n);
  rep.mae_overall = (sae_off + sae_dur) / (2.0 * n);
  rep.rmse_overall = std::sqrt((sse_off + sse_dur) / (2.0 * n));
  if (R.size() >= 2) {
    if (sst_off > 0.0) rep.r2_offset = 1.0 - sse_off / sst_off;
    if (sst_dur > 0.0) rep.r2_duration = 1.0 - sse_dur / sst_dur;
    if (sst_off + sst_dur > 0.0)
      rep.r2_overall = 1.0 - (sse_off + sse_dur) / (sst_off + sst_dur);
  }
  return rep;
}

double require_r2(const std::optional<double>& r2, const char* scope) {
  if (!r2)
    throw R2Undefined(std::string("R2 undefined for ") + scope +
                      ": truth variance is zero or fewer than two samples");
  return *r2;
}

std::string predictions_csv(const EvaluationSet& ev) {
  std::string out =
      "callsign,onset_t,offset_hat,duration_hat,offset_true,duration_true\n";
  for (const auto& r : ev.records) {
    out += r.callsign;
    out += ',';
    out += fmt_double(r.onset_t);
    out += ',';
    out += fmt_double(r.offset_hat);
    out += ',';
    out += fmt_double(r.duration_hat);
    out += ',';
    out += fmt_double(r.offset_true);
    out += ',';
    out += fmt_double(r.duration_true);
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  const auto put = [&j](const char* key, const std::optional<double>& v) {
    if (v)
      j[key] = *v;
    else
      j[key] = nullptr;
  };
  j["mae_overall"] = r.mae_overall;
  j["rmse_overall"] = r.rmse_overall;
  put("r2_overall", r.r2_overall);
  j["mae_offset"] = r.mae_offset;
  j["mae_duration"] = r.mae_duration;
  j["rmse_offset"] = r.rmse_offset;
  j["rmse_duration"] = r.rmse_duration;
  put("r2_offset", r.r2_offset);
  put("r2_duration", r.r2_duration);
  return j;
}

}  // namespace atcline
