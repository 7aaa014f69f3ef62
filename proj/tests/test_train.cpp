#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <doctest.h>

#include "atcline/align.hpp"
#include "atcline/dataset.hpp"
#include "atcline/detect.hpp"
#include "atcline/errors.hpp"
#include "atcline/io.hpp"
#include "atcline/phrase.hpp"
#include "atcline/synthgen.hpp"
#include "atcline/train.hpp"

using namespace atcline;

namespace {

// Full pipeline on generated traffic: detect, parse, align, materialize.
Dataset make_dataset(int n_flights, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.n_flights = n_flights;
  cfg.seed = seed;
  const Scenario sc = generate_scenario(cfg);

  const CallsignTable table = CallsignTable::builtin();
  const PhraseRules rules = PhraseRules::builtin();
  std::vector<ParsedCommand> cmds;
  for (const auto& u : sc.transcript) {
    const ParseResult r = parse_utterance(u, table, rules);
    if (r.status == ParseStatus::ok && !r.cmd.flagged()) cmds.push_back(r.cmd);
  }
  std::vector<ManeuverEvent> events;
  for (const auto& t : sc.trajs)
    for (const auto& e : extract_maneuvers(t, DetectorConfig{}))
      events.push_back(e);

  DatasetConfig dscfg;
  dscfg.seed = seed;
  dscfg.raster.width = 32;
  dscfg.raster.height = 32;
  FeatureContext ctx;
  return build_dataset(align(cmds, events, {}).pairs, sc.trajs, ctx, dscfg, 1);
}

const Dataset& shared_dataset() {
  static const Dataset ds = make_dataset(14, 42);
  return ds;
}

ModelConfig small_model(const Dataset& ds) {
  ModelConfig m = model_config_for(ds);
  m.d_mlp = 16;
  m.d_seq_hidden = 16;
  m.n_layers = 1;
  m.n_heads = 2;
  m.d_ffn = 32;
  m.cnn_channels = {4, 8};
  m.d_img = 16;
  m.fusion_hidden = 32;
  return m;
}

TrainConfig quick_train(std::size_t epochs) {
  TrainConfig t;
  t.lr = 3e-4;
  t.batch_size = 8;
  t.epochs = epochs;
  t.seed = 7;
  return t;
}

ModelConfig tiny_config() {
  ModelConfig m;
  m.d_struct_in = 6;
  m.d_mlp = 4;
  m.seq_len = 5;
  m.d_seq_in = 4;
  m.d_seq_hidden = 4;
  m.n_layers = 2;
  m.n_heads = 2;
  m.d_ffn = 8;
  m.img_size = 8;
  m.cnn_channels = {2, 3};
  m.d_img = 8;
  m.fusion_hidden = 8;
  m.dropout = 0.1;
  return m;
}

}  // namespace

TEST_CASE("train: cosine schedule matches the closed form") {
  for (const double lr0 : {1e-5, 3e-4, 1.0})
    for (const std::size_t n : {std::size_t{1}, std::size_t{10}, std::size_t{50}})
      for (std::size_t e = 0; e < n; ++e) {
        const double want =
            lr0 * (1.0 + std::cos(M_PI * static_cast<double>(e) /
                                  static_cast<double>(n))) /
            2.0;
        CHECK(std::fabs(cosine_lr(lr0, e, n) - want) <= 1e-12);
      }
  CHECK(cosine_lr(2.5e-4, 0, 50) == 2.5e-4);
}

TEST_CASE("train: config validation") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());
  t.lr = 0.0;
  CHECK_THROWS_AS(t.validate(), BadConfig);
  t.lr = -1e-4;
  CHECK_THROWS_AS(t.validate(), BadConfig);
  t = TrainConfig{};
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), BadConfig);
  t = TrainConfig{};
  t.epochs = 0;
  CHECK_THROWS_AS(t.validate(), BadConfig);
}

TEST_CASE("train: same seed reproduces parameter bytes at every epoch") {
  const Dataset& ds = shared_dataset();
  const ModelConfig mcfg = small_model(ds);
  const TrainConfig tcfg = quick_train(4);

  const TrainResult a = train(ds, mcfg, tcfg);
  const TrainResult b = train(ds, mcfg, tcfg);
  REQUIRE(a.curve.size() == 4);
  REQUIRE(b.curve.size() == 4);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(a.curve[e].param_hash == b.curve[e].param_hash);
    CHECK(a.curve[e].train_loss == b.curve[e].train_loss);
    CHECK(a.curve[e].val_mae_overall == b.curve[e].val_mae_overall);
  }
  CHECK(param_bytes_hash(a.params) == param_bytes_hash(b.params));

  TrainConfig other = tcfg;
  other.seed = 8;
  const TrainResult c = train(ds, mcfg, other);
  CHECK(c.curve.back().param_hash != a.curve.back().param_hash);
}

TEST_CASE("train: loss decreases on generated traffic") {
  const Dataset& ds = shared_dataset();
  const TrainResult r = train(ds, small_model(ds), quick_train(8));
  REQUIRE(r.curve.size() == 8);
  CHECK(r.curve.back().train_loss < r.curve.front().train_loss);
  // The schedule decays: every logged lr is positive and non-increasing.
  for (std::size_t e = 1; e < r.curve.size(); ++e) {
    CHECK(r.curve[e].lr > 0.0);
    CHECK(r.curve[e].lr <= r.curve[e - 1].lr);
  }
}

TEST_CASE("train: checkpoints tag improvements and keep the best two per criterion") {
  const Dataset& ds = shared_dataset();
  const ModelConfig mcfg = small_model(ds);
  const TrainConfig tcfg = quick_train(6);

  std::vector<std::pair<std::string, std::size_t>> emitted;
  const TrainResult r = train(ds, mcfg, tcfg, [&](const Checkpoint& c) {
    emitted.emplace_back(c.improvement, c.epoch);
  });

  // Epoch 0 improves every criterion from infinity.
  REQUIRE_FALSE(r.curve.empty());
  CHECK(r.curve[0].improved ==
        std::vector<std::string>{"offset", "duration", "overall"});

  std::size_t total_improvements = 0;
  for (const auto& e : r.curve) total_improvements += e.improved.size();
  CHECK(emitted.size() == total_improvements);

  for (const std::string tag : {"offset", "duration", "overall"}) {
    // Last two improvement epochs for this tag, from the curve.
    std::vector<std::size_t> improved_epochs;
    for (const auto& e : r.curve)
      for (const auto& t : e.improved)
        if (t == tag) improved_epochs.push_back(e.epoch);
    REQUIRE_FALSE(improved_epochs.empty());

    std::vector<std::size_t> kept_epochs;
    for (const auto& c : r.checkpoints)
      if (c.improvement == tag) kept_epochs.push_back(c.epoch);
    CHECK(kept_epochs.size() == std::min<std::size_t>(2, improved_epochs.size()));
    const std::size_t skip = improved_epochs.size() > 2
                                 ? improved_epochs.size() - 2
                                 : 0;
    CHECK(kept_epochs ==
          std::vector<std::size_t>(improved_epochs.begin() + skip,
                                   improved_epochs.end()));
  }

  // Checkpoint metadata mirrors the curve and the dataset.
  for (const auto& c : r.checkpoints) {
    CHECK(c.schema_hash == ds.schema_hash);
    CHECK(c.seed == tcfg.seed);
    CHECK(c.variant == tcfg.variant);
    const auto& e = r.curve[c.epoch];
    CHECK(c.val_mae_offset == e.val_mae_offset);
    CHECK(c.val_mae_duration == e.val_mae_duration);
    CHECK(c.val_mae_overall == e.val_mae_overall);
  }

  // Improvements are monotone: each emitted value for a tag is strictly below
  // the previous one.
  for (const std::string tag : {"offset", "duration", "overall"}) {
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& e : r.curve) {
      const bool improved =
          std::find(e.improved.begin(), e.improved.end(), tag) !=
          e.improved.end();
      const double v = tag == std::string("offset")     ? e.val_mae_offset
                       : tag == std::string("duration") ? e.val_mae_duration
                                                        : e.val_mae_overall;
      if (improved) {
        CHECK(v < prev);
        prev = v;
      } else {
        CHECK(v >= prev);
      }
    }
  }
}

TEST_CASE("train: checkpoint files round trip and reject drift") {
  const Dataset& ds = shared_dataset();
  const ModelConfig mcfg = small_model(ds);
  const TrainResult r = train(ds, mcfg, quick_train(2));
  REQUIRE_FALSE(r.checkpoints.empty());
  const Checkpoint& orig = r.checkpoints.back();

  const auto dir = std::filesystem::temp_directory_path() / "atcline_ckpt";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.ckpt";
  save_checkpoint(path, orig);

  const Checkpoint back = load_checkpoint(path);
  CHECK(param_bytes_hash(back.params) == param_bytes_hash(orig.params));
  CHECK(back.stats.targets.mean == orig.stats.targets.mean);
  CHECK(back.stats.features.stdev == orig.stats.features.stdev);
  CHECK(back.schema_hash == orig.schema_hash);
  CHECK(back.variant == orig.variant);
  CHECK(back.improvement == orig.improvement);
  CHECK(back.epoch == orig.epoch);
  CHECK(back.seed == orig.seed);
  CHECK(back.val_mae_overall == orig.val_mae_overall);

  // Same seed twice, saved again: byte-identical files.
  const auto path2 = dir / "model2.ckpt";
  save_checkpoint(path2, orig);
  CHECK(read_binary_file(path) == read_binary_file(path2));

  const auto bytes = read_binary_file(path);

  {  // Renamed tensor: the layout no longer matches the model.
    auto tampered = bytes;
    const std::string needle = "mlp.fc1.w";
    const auto it = std::search(tampered.begin(), tampered.end(),
                                needle.begin(), needle.end());
    REQUIRE(it != tampered.end());
    *it = 'x';
    const auto p = dir / "renamed.ckpt";
    write_binary_file(p, tampered.data(), tampered.size());
    CHECK_THROWS_AS(load_checkpoint(p), SchemaMismatch);
  }
  {  // Header width no longer matches the stored tensor shapes.
    auto tampered = bytes;
    const std::string needle = "\"d_mlp\":16";
    const std::string repl = "\"d_mlp\":32";
    const auto it = std::search(tampered.begin(), tampered.end(),
                                needle.begin(), needle.end());
    REQUIRE(it != tampered.end());
    std::copy(repl.begin(), repl.end(), it);
    const auto p = dir / "rewidth.ckpt";
    write_binary_file(p, tampered.data(), tampered.size());
    CHECK_THROWS_AS(load_checkpoint(p), SchemaMismatch);
  }
  {  // Truncated tensor payload.
    auto tampered = bytes;
    tampered.resize(tampered.size() - 16);
    const auto p = dir / "short.ckpt";
    write_binary_file(p, tampered.data(), tampered.size());
    CHECK_THROWS_AS(load_checkpoint(p), IoError);
  }
  {  // Wrong magic.
    auto tampered = bytes;
    tampered[0] = 'Z';
    const auto p = dir / "magic.ckpt";
    write_binary_file(p, tampered.data(), tampered.size());
    CHECK_THROWS_AS(load_checkpoint(p), IoError);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("train: training a reloaded dataset gives identical results") {
  const Dataset& ds = shared_dataset();
  const auto dir = std::filesystem::temp_directory_path() / "atcline_train_ds";
  std::filesystem::remove_all(dir);
  save_dataset(dir, ds);
  const Dataset loaded = load_dataset(dir);
  std::filesystem::remove_all(dir);

  const ModelConfig mcfg = small_model(ds);
  const TrainConfig tcfg = quick_train(3);
  const TrainResult a = train(ds, mcfg, tcfg);
  const TrainResult b = train(loaded, mcfg, tcfg);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t e = 0; e < a.curve.size(); ++e)
    CHECK(a.curve[e].param_hash == b.curve[e].param_hash);
}

TEST_CASE("train: empty data is refused") {
  const ModelConfig mcfg = tiny_config();
  CHECK_THROWS_AS(train(Dataset{}, mcfg, TrainConfig{}), NoData);

  Dataset no_val = shared_dataset();
  no_val.val_idx.clear();
  CHECK_THROWS_AS(train(no_val, small_model(no_val), TrainConfig{}), NoData);
}

TEST_CASE("train: gradient check validates the backward pass") {
  const auto t0 = std::chrono::steady_clock::now();
  const GradCheckReport rep = gradient_check(tiny_config(), 7, 3);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  CHECK(rep.n_scalars == 972);
  CHECK(rep.max_rel_err < 1e-4);
  CHECK(elapsed < 30.0);

  // Deterministic report.
  const GradCheckReport again = gradient_check(tiny_config(), 7, 3);
  CHECK(again.max_rel_err == rep.max_rel_err);
  CHECK(again.adjustments == rep.adjustments);

  CHECK_THROWS_AS(gradient_check(tiny_config(), 7, 0), BadConfig);
}

TEST_CASE("train: parameter hash detects any scalar change") {
  const ModelConfig cfg = tiny_config();
  ModelParams a = ModelParams::init(cfg, 5);
  const ModelParams b = ModelParams::init(cfg, 5);
  CHECK(param_bytes_hash(a) == param_bytes_hash(b));
  a.layers[1].ffn2.w.v[3] += 1e-15;
  CHECK(param_bytes_hash(a) != param_bytes_hash(b));
}
