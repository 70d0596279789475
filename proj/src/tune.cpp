#include "ctlab/tune.hpp"

#include "ctlab/error.hpp"
#include "ctlab/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ctlab {

void SearchSpace::validate() const {
  if (!(lr_min > 0.0 && lr_min <= lr_max && lr_max < 1.0)) throw ConfigError("search space: need 0 < lr_min <= lr_max < 1");
  if (batch_sizes.empty()) throw ConfigError("search space: batch_sizes is empty");
  for (int b : batch_sizes)
    if (b < 1) throw ConfigError("search space: batch sizes must be >= 1");
}

namespace {

struct Point {
  double log_lr;
  std::size_t batch_index;
};

Point random_point(const SearchSpace& s, Rng& rng) {
  return {rng.uniform(std::log(s.lr_min), std::log(s.lr_max)), static_cast<std::size_t>(rng.below(s.batch_sizes.size()))};
}

/// Parzen density: Gaussian kernels on log-lr times a smoothed categorical on batch size.
double parzen(const Point& x, const std::vector<Point>& obs, double bandwidth, std::size_t n_batches) {
  if (obs.empty()) return 1.0;
  double lr_density = 0.0;
  std::vector<double> cat(n_batches, 1.0);  // add-one smoothing
  for (const auto& o : obs) {
    const double z = (x.log_lr - o.log_lr) / bandwidth;
    lr_density += std::exp(-0.5 * z * z) / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
    cat[o.batch_index] += 1.0;
  }
  lr_density /= static_cast<double>(obs.size());
  const double cat_p = cat[x.batch_index] / (static_cast<double>(obs.size()) + static_cast<double>(n_batches));
  return lr_density * cat_p + 1e-300;
}

Point propose_model_based(const SearchSpace& s, const TuneOptions& opt, const std::vector<Trial>& trials, Rng& rng) {
  std::vector<std::pair<double, Point>> scored;
  for (const auto& t : trials) {
    if (!t.objective) continue;
    const auto it = std::find(s.batch_sizes.begin(), s.batch_sizes.end(), t.batch_size);
    scored.push_back({*t.objective, {std::log(t.learning_rate), static_cast<std::size_t>(it - s.batch_sizes.begin())}});
  }
  if (scored.size() < 2) return random_point(s, rng);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const auto n_good = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(opt.good_fraction * scored.size())));
  std::vector<Point> good, bad;
  for (std::size_t i = 0; i < scored.size(); ++i) (i < n_good ? good : bad).push_back(scored[i].second);

  const double range = std::log(s.lr_max) - std::log(s.lr_min);
  const double bandwidth = std::max(1e-3, range / std::max(1.0, std::sqrt(static_cast<double>(scored.size()))));
  Point best{};
  double best_ratio = -1.0;
  for (int k = 0; k < opt.candidates; ++k) {
    const auto& anchor = good[rng.below(good.size())];
    Point c;
    c.log_lr = std::clamp(anchor.log_lr + rng.normal(0.0, bandwidth), std::log(s.lr_min), std::log(s.lr_max));
    c.batch_index = rng.uniform() < 0.75 ? anchor.batch_index : static_cast<std::size_t>(rng.below(s.batch_sizes.size()));
    const double ratio = parzen(c, good, bandwidth, s.batch_sizes.size()) / parzen(c, bad, bandwidth, s.batch_sizes.size());
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = c;
    }
  }
  return best;
}

}  // namespace

std::string trials_to_jsonl(const std::vector<Trial>& trials) {
  std::string out;
  for (const auto& t : trials) {
    nlohmann::ordered_json j;
    j["trial"] = t.index;
    j["learning_rate"] = t.learning_rate;
    j["batch_size"] = t.batch_size;
    j["objective"] = t.objective ? nlohmann::ordered_json(*t.objective) : nlohmann::ordered_json(nullptr);
    if (!t.error.empty()) j["error"] = t.error;
    out += j.dump() + "\n";
  }
  return out;
}

TuneResult tune(const ModelConfig& base, const SearchSpace& space, const TuneOptions& options,
                const TuneObjective& objective, const std::filesystem::path& trial_log) {
  space.validate();
  if (options.budget < 1) throw ConfigError("tune: budget must be >= 1");
  Rng rng = Rng::substream(options.seed, "tune");
  TuneResult result;
  std::optional<std::size_t> best_index;

  for (int i = 0; i < options.budget; ++i) {
    const bool random_phase = options.strategy == TuneStrategy::Random || i < options.startup_trials;
    const Point p = random_phase ? random_point(space, rng) : propose_model_based(space, options, result.trials, rng);
    Trial t;
    t.index = i + 1;
    t.learning_rate = std::exp(p.log_lr);
    t.batch_size = space.batch_sizes[p.batch_index];
    ModelConfig cfg = base;
    cfg.learning_rate = t.learning_rate;
    cfg.batch_size = t.batch_size;
    try {
      const double v = objective(cfg);
      if (!std::isfinite(v)) throw TrainingError("objective returned a non-finite value");
      t.objective = v;
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    result.trials.push_back(t);
    if (t.objective && (!best_index || *t.objective > *result.trials[*best_index].objective))
      best_index = result.trials.size() - 1;
    if (!trial_log.empty()) write_file(trial_log, trials_to_jsonl(result.trials));
  }

  if (!best_index) {
    std::string msg = "tune: all " + std::to_string(options.budget) + " trials failed:";
    for (const auto& t : result.trials) msg += "\n  trial " + std::to_string(t.index) + ": " + t.error;
    throw Error(msg);
  }
  result.best_trial = result.trials[*best_index];
  result.best = base;
  result.best.learning_rate = result.best_trial.learning_rate;
  result.best.batch_size = result.best_trial.batch_size;
  return result;
}

}  // namespace ctlab
