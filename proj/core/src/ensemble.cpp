#include "atcline/ensemble.hpp"

#include <algorithm>
#include <array>

#include "atcline/errors.hpp"
#include "atcline/features.hpp"
#include "atcline/par.hpp"
#include "atcline/rng.hpp"

namespace atcline {

const char* category_name(Category c) {
  switch (c) {
    case Category::offset: return "offset";
    case Category::duration: return "duration";
    case Category::overall: return "overall";
  }
  throw BadConfig("unknown ensemble category");
}

Category category_from_name(std::string_view name) {
  if (name == "offset") return Category::offset;
  if (name == "duration") return Category::duration;
  if (name == "overall") return Category::overall;
  throw BadConfig("unknown ensemble category: " + std::string(name));
}

double CategoryWeights::at(Category c) const {
  switch (c) {
    case Category::offset: return offset;
    case Category::duration: return duration;
    case Category::overall: return overall;
  }
  throw BadConfig("unknown ensemble category");
}

namespace {

void check_weights(const CategoryWeights& w, const char* target) {
  if (!(w.offset >= 0.0) || !(w.duration >= 0.0) || !(w.overall >= 0.0))
    throw BadConfig(std::string("negative ensemble weight for the ") + target +
                    " target");
  if (!(w.sum() > 0.0))
    throw BadConfig(std::string("ensemble weights for the ") + target +
                    " target sum to zero");
}

}  // namespace

void EnsembleSpec::validate() const {
  for (const Category c :
       {Category::offset, Category::duration, Category::overall}) {
    const bool present = std::any_of(
        members.begin(), members.end(),
        [c](const EnsembleMember& m) { return m.category == c; });
    if (!present)
      throw IncompleteEnsemble(std::string("no ensemble member in the ") +
                               category_name(c) + " category");
  }
  for (const auto& m : members)
    if (m.ckpt.schema_hash != members.front().ckpt.schema_hash)
      throw SchemaMismatch("ensemble members trained on different schemas");
  check_weights(offset_target, "offset");
  check_weights(duration_target, "duration");
}

EnsembleSpec ensemble_from_checkpoints(const std::vector<Checkpoint>& pool) {
  EnsembleSpec spec;
  for (const auto& c : pool)
    spec.members.push_back({c, category_from_name(c.improvement)});
  spec.validate();
  return spec;
}

std::pair<double, double> weighted_predict(const EnsembleSpec& spec,
                                           const LifecycleSample& s) {
  spec.validate();
  std::array<double, 3> off_sum{}, dur_sum{};
  std::array<std::size_t, 3> count{};
  for (const auto& m : spec.members) {
    const Prediction p = predict(m.ckpt.params, m.ckpt.stats, s);
    const auto k = static_cast<std::size_t>(m.category);
    off_sum[k] += p.offset_s;
    dur_sum[k] += p.duration_s;
    count[k] += 1;
  }
  double off_hat = 0.0, dur_hat = 0.0;
  for (const Category c :
       {Category::offset, Category::duration, Category::overall}) {
    const auto k = static_cast<std::size_t>(c);
    const double n = static_cast<double>(count[k]);
    off_hat += spec.offset_target.at(c) / spec.offset_target.sum() *
               (off_sum[k] / n);
    dur_hat += spec.duration_target.at(c) / spec.duration_target.sum() *
               (dur_sum[k] / n);
  }
  return {off_hat, dur_hat};
}

Predictor single_model_predictor(const Checkpoint& c) {
  return [&c](const LifecycleSample& s) {
    const Prediction p = predict(c.params, c.stats, s);
    return std::pair<double, double>{p.offset_s, p.duration_s};
  };
}

Predictor ensemble_predictor(const EnsembleSpec& spec) {
  return [&spec](const LifecycleSample& s) { return weighted_predict(spec, s); };
}

Predictor mean_baseline(const Dataset& ds) {
  if (ds.train_idx.empty())
    throw NoData("mean baseline needs a training split");
  double off = 0.0, dur = 0.0;
  for (const std::size_t i : ds.train_idx) {
    off += ds.samples[i].time_offset_s;
    dur += ds.samples[i].duration_s;
  }
  off /= static_cast<double>(ds.train_idx.size());
  dur /= static_cast<double>(ds.train_idx.size());
  return [off, dur](const LifecycleSample&) {
    return std::pair<double, double>{off, dur};
  };
}

EvaluationSet evaluate_samples(const Predictor& model,
                               const std::vector<LifecycleSample>& samples,
                               int threads) {
  if (!model) throw BadConfig("evaluate needs a predictor");
  EvaluationSet ev;
  ev.records.resize(samples.size());
  parallel_for(samples.size(), static_cast<unsigned>(std::max(threads, 1)),
               [&](std::size_t i) {
                 const auto& s = samples[i];
                 const auto [off, dur] = model(s);
                 ev.records[i] = {s.callsign,       s.event.onset_t,
                                  s.time_offset_s,  s.duration_s,
                                  off,              dur};
               });
  return ev;
}

EvaluationSet evaluate_split(const Predictor& model, const Dataset& ds,
                             const std::vector<std::size_t>& idx, int threads) {
  std::vector<LifecycleSample> subset;
  subset.reserve(idx.size());
  for (const std::size_t i : idx) {
    if (i >= ds.samples.size())
      throw OutOfRange("split index " + std::to_string(i) +
                       " outside the dataset");
    subset.push_back(ds.samples[i]);
  }
  return evaluate_samples(model, subset, threads);
}

double permutation_importance(const Predictor& model,
                              const std::vector<LifecycleSample>& samples,
                              std::string_view slot, std::uint64_t seed,
                              int threads) {
  const auto& names = StructuredFeatures::names();
  const auto it = std::find(names.begin(), names.end(), slot);
  if (it == names.end())
    throw BadSlot("unknown structured feature slot: " + std::string(slot));
  const auto k = static_cast<std::size_t>(it - names.begin());
  if (samples.empty()) throw NoData("permutation importance needs samples");

  const double base =
      compute_metrics(evaluate_samples(model, samples, threads)).mae_overall;

  std::vector<std::size_t> perm(samples.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng = Rng(seed).fork("perm-" + std::string(slot));
  rng.shuffle(perm);

  std::vector<LifecycleSample> shuffled = samples;
  for (std::size_t i = 0; i < shuffled.size(); ++i)
    shuffled[i].features.values[k] = samples[perm[i]].features.values[k];

  const double permuted =
      compute_metrics(evaluate_samples(model, shuffled, threads)).mae_overall;
  return permuted - base;
}

}  // namespace atcline
