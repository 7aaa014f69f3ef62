#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "atcline/dataset.hpp"
#include "atcline/metrics.hpp"
#include "atcline/train.hpp"

// Task-aware weighted ensemble over trained checkpoints, the predictor
// plumbing that turns models into evaluation sets, and permutation importance
// over the structured feature slots.
namespace atcline {

// Which validation criterion a member checkpoint was best at.
enum class Category { offset, duration, overall };

const char* category_name(Category c);
Category category_from_name(std::string_view name);

struct EnsembleMember {
  Checkpoint ckpt;
  Category category = Category::overall;
};

// Per-category mixing weights for one target. Zeros are allowed; the weights
// are renormalized to sum 1 before use, so only ratios matter.
struct CategoryWeights {
  double offset = 0.0;
  double duration = 0.0;
  double overall = 0.0;

  double at(Category c) const;
  double sum() const { return offset + duration + overall; }
};

// Members grouped by category with target-specific weights: the offset target
// leans on offset-category members and the duration target mirrors that.
struct EnsembleSpec {
  std::vector<EnsembleMember> members;
  CategoryWeights offset_target{0.5, 0.1, 0.3};
  CategoryWeights duration_target{0.1, 0.5, 0.3};

  // Every category populated, all members on one feature schema, both weight
  // triples nonnegative with positive sum.
  void validate() const;
};

// One member per retained checkpoint, categorized by its improvement tag.
// Feeding the retained checkpoints of one run per loss variant yields the
// standard two-variants x three-categories x top-two ensemble.
EnsembleSpec ensemble_from_checkpoints(const std::vector<Checkpoint>& pool);

// Per target: mean member prediction within each category, then the weighted
// sum of category means under that target's renormalized weights. Returns
// (offset_hat, duration_hat) in seconds.
std::pair<double, double> weighted_predict(const EnsembleSpec& spec,
                                           const LifecycleSample& s);

// Maps a sample to (offset_hat, duration_hat) in seconds.
using Predictor = std::function<std::pair<double, double>(const LifecycleSample&)>;

// Wrappers hold references; the checkpoint / spec must outlive the predictor.
Predictor single_model_predictor(const Checkpoint& c);
Predictor ensemble_predictor(const EnsembleSpec& spec);

// Predicts the training-split target means everywhere; the floor any learned
// model must beat.
Predictor mean_baseline(const Dataset& ds);

// Runs the predictor over the given samples; parallel across samples, records
// land in input order so downstream metrics are thread-count independent.
EvaluationSet evaluate_samples(const Predictor& model,
                               const std::vector<LifecycleSample>& samples,
                               int threads = 1);
EvaluationSet evaluate_split(const Predictor& model, const Dataset& ds,
                             const std::vector<std::size_t>& idx,
                             int threads = 1);

// Shuffles one structured slot's values across the samples (seeded), then
// returns MAE_overall(shuffled) - MAE_overall(intact): the error increase
// attributable to that slot's alignment with the samples.
double permutation_importance(const Predictor& model,
                              const std::vector<LifecycleSample>& samples,
                              std::string_view slot, std::uint64_t seed,
                              int threads = 1);

}  // namespace atcline
