#include "ctlab/ensemble.hpp"

#include "ctlab/random.hpp"
#include "ctlab/trainer.hpp"
#include "ctlab/util.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <unordered_set>

namespace ctlab {

std::string_view to_string(Combiner c) {
  switch (c) {
    case Combiner::Mean: return "mean";
    case Combiner::Vote: return "vote";
    case Combiner::Stacker: return "stacker";
  }
  return "vote";
}

Combiner parse_combiner(std::string_view s) {
  if (s == "mean") return Combiner::Mean;
  if (s == "vote") return Combiner::Vote;
  if (s == "stacker" || s == "mlp") return Combiner::Stacker;
  throw ConfigError("unknown combiner '" + std::string(s) + "' (expected mean, vote or stacker)");
}

Eigen::MatrixXd stack_inputs(std::span<const ProbabilityMatrix> members) {
  check_members(members);
  Eigen::MatrixXd x(members.front().rows(), kEnsembleSize * kNumClasses);
  for (int k = 0; k < kEnsembleSize; ++k) x.middleCols(k * kNumClasses, kNumClasses) = members[k];
  return x;
}

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
}

struct AdamSlot {
  Eigen::MatrixXd m, v;
  void step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, double lr, long t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (m.size() == 0) {
      m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
      v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    }
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(b1, static_cast<double>(t)), c2 = 1 - std::pow(b2, static_cast<double>(t));
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

Eigen::MatrixXd to_mat(const std::vector<double>& flat, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw ValidationError("stacker: weight shape mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  return m;
}

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

}  // namespace

ProbabilityMatrix StackerModel::predict(std::span<const ProbabilityMatrix> members) const {
  const Eigen::MatrixXd x = stack_inputs(members);
  const Eigen::MatrixXd h = ((x * w1.transpose()).rowwise() + b1.transpose()).array().tanh();
  return sigmoid((h * w2.transpose()).rowwise() + b2.transpose());
}

std::string StackerModel::to_json() const {
  nlohmann::ordered_json j;
  j["hidden"] = w1.rows();
  j["seed"] = seed;
  j["w1"] = flatten(w1);
  j["b1"] = flatten(b1);
  j["w2"] = flatten(w2);
  j["b2"] = flatten(b2);
  j["trained_on"] = trained_on;
  return j.dump() + "\n";
}

StackerModel StackerModel::from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    const auto hidden = j.at("hidden").get<Eigen::Index>();
    StackerModel s;
    s.w1 = to_mat(j.at("w1").get<std::vector<double>>(), hidden, kEnsembleSize * kNumClasses);
    s.b1 = to_mat(j.at("b1").get<std::vector<double>>(), hidden, 1);
    s.w2 = to_mat(j.at("w2").get<std::vector<double>>(), kNumClasses, hidden);
    s.b2 = to_mat(j.at("b2").get<std::vector<double>>(), kNumClasses, 1);
    s.trained_on = j.value("trained_on", std::vector<std::string>{});
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("stacker file: ") + e.what());
  }
}

StackerModel train_stacker(std::span<const ProbabilityMatrix> members, std::span<const LabelVector> labels,
                           std::span<const std::string> row_ids, const SplitSpec& split, const StackerOptions& opt) {
  check_members(members);
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (members.front().rows() != n || row_ids.size() != labels.size())
    throw ValidationError("train_stacker: predictions, labels and ids are not aligned");
  if (n == 0) throw EmptyInputError("train_stacker: no validation rows");

  const std::unordered_set<std::string> test(split.test.begin(), split.test.end());
  const std::unordered_set<std::string> val(split.val.begin(), split.val.end());
  std::vector<std::string> leaked;
  for (const auto& id : row_ids)
    if (test.contains(id)) leaked.push_back(id);
  if (!leaked.empty())
    throw LeakageError("train_stacker: " + std::to_string(leaked.size()) + " test-split ids in stacker input (first: '" +
                       leaked.front() + "')");
  for (const auto& id : row_ids)
    if (!val.contains(id)) throw ValidationError("train_stacker: id '" + id + "' is not in the validation split");

  ClassCounts counts{};
  Eigen::MatrixXd y(n, kNumClasses);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < kNumClasses; ++c) {
      y(i, c) = labels[static_cast<std::size_t>(i)][c];
      counts[c] += labels[static_cast<std::size_t>(i)][c];
    }
  ClassWeights weights;
  if (std::all_of(counts.begin(), counts.end(), [](auto k) { return k > 0; }))
    weights = compute_class_weights(counts, static_cast<std::size_t>(n));
  const Eigen::RowVector4d w(weights.w[0], weights.w[1], weights.w[2], weights.w[3]);

  Rng rng = Rng::substream(opt.seed, "stacker");
  const int in_dim = kEnsembleSize * kNumClasses;
  StackerModel s;
  s.seed = opt.seed;
  s.trained_on.assign(row_ids.begin(), row_ids.end());
  s.w1.resize(opt.hidden, in_dim);
  s.w2.resize(kNumClasses, opt.hidden);
  const double a1 = std::sqrt(6.0 / (opt.hidden + in_dim)), a2 = std::sqrt(6.0 / (opt.hidden + kNumClasses));
  for (Eigen::Index c = 0; c < s.w1.cols(); ++c)
    for (Eigen::Index r = 0; r < s.w1.rows(); ++r) s.w1(r, c) = rng.uniform(-a1, a1);
  for (Eigen::Index c = 0; c < s.w2.cols(); ++c)
    for (Eigen::Index r = 0; r < s.w2.rows(); ++r) s.w2(r, c) = rng.uniform(-a2, a2);
  s.b1 = Eigen::VectorXd::Zero(opt.hidden);
  s.b2 = Eigen::VectorXd::Zero(kNumClasses);

  const Eigen::MatrixXd x = stack_inputs(members);
  AdamSlot sw1, sb1, sw2, sb2;
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const Eigen::MatrixXd h = ((x * s.w1.transpose()).rowwise() + s.b1.transpose()).array().tanh();
    const Eigen::MatrixXd p = sigmoid((h * s.w2.transpose()).rowwise() + s.b2.transpose());
    // d/dz of positive-weighted BCE: p (w y + 1 - y) - w y
    const Eigen::MatrixXd wy = y.array().rowwise() * w.array();
    const Eigen::MatrixXd dz = (p.array() * (wy.array() + 1.0 - y.array()) - wy.array()) / static_cast<double>(n);
    Eigen::MatrixXd g_w2 = dz.transpose() * h;
    Eigen::MatrixXd g_b2 = dz.colwise().sum().transpose();
    const Eigen::MatrixXd dh = (dz * s.w2).array() * (1.0 - h.array().square());
    Eigen::MatrixXd g_w1 = dh.transpose() * x;
    Eigen::MatrixXd g_b1 = dh.colwise().sum().transpose();
    Eigen::MatrixXd b1 = s.b1, b2 = s.b2;
    sw1.step(s.w1, g_w1, opt.learning_rate, epoch);
    sb1.step(b1, g_b1, opt.learning_rate, epoch);
    sw2.step(s.w2, g_w2, opt.learning_rate, epoch);
    sb2.step(b2, g_b2, opt.learning_rate, epoch);
    s.b1 = b1;
    s.b2 = b2;
  }
  return s;
}

void EnsembleSpec::validate() const {
  if (members.size() != kEnsembleSize)
    throw ConfigError("ensemble '" + name + "' must list exactly 5 members, got " + std::to_string(members.size()));
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("ensemble threshold must be in (0, 1)");
  if (combiner == Combiner::Stacker && stacker.empty()) throw ConfigError("stacker combiner requires a 'stacker' path");
}

EnsembleSpec load_ensemble_spec(const std::filesystem::path& file, const std::filesystem::path& base_dir) {
  if (!std::filesystem::exists(file)) throw ConfigError("ensemble spec not found: " + file.string());
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  try {
    auto j = nlohmann::json::parse(read_file(file));
    EnsembleSpec s;
    s.name = j.value("name", file.stem().string());
    for (const auto& m : j.at("members")) s.members.push_back(resolve(m.get<std::string>()));
    s.combiner = parse_combiner(j.value("combiner", std::string("vote")));
    s.threshold = j.value("threshold", kDefaultThreshold);
    if (j.contains("stacker") && !j["stacker"].is_null()) s.stacker = resolve(j["stacker"].get<std::string>());
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("ensemble spec " + file.string() + ": " + e.what());
  }
}

EnsembleOutput combine(std::vector<ProbabilityMatrix> member_predictions, Combiner combiner, double threshold,
                       const StackerModel* stacker) {
  std::span<const ProbabilityMatrix> members(member_predictions);
  check_members(members);
  EnsembleOutput out;
  switch (combiner) {
    case Combiner::Mean:
      out.scores = combine_mean(members);
      out.decisions = decide_rows(out.scores, threshold);
      break;
    case Combiner::Vote: {
      BinaryMatrix votes = combine_vote(members, threshold);
      const ProbabilityMatrix mean = combine_mean(members);
      out.scores = votes.cast<double>();
      out.decisions.reserve(static_cast<std::size_t>(votes.rows()));
      for (Eigen::Index i = 0; i < votes.rows(); ++i) out.decisions.push_back(decide_vote(votes.row(i), mean.row(i)));
      out.votes = std::move(votes);
      break;
    }
    case Combiner::Stacker:
      if (!stacker) throw ConfigError("stacker combiner requires a trained stacker");
      out.scores = stacker->predict(members);
      out.decisions = decide_rows(out.scores, threshold);
      break;
  }
  out.member_predictions = std::move(member_predictions);
  return out;
}

EnsembleOutput run_ensemble(std::span<const Predictor* const> members, Combiner combiner, double threshold,
                            std::span<const std::string> texts, const StackerModel* stacker) {
  if (members.size() != kEnsembleSize)
    throw ValidationError("ensemble needs exactly 5 members, got " + std::to_string(members.size()));
  std::vector<ProbabilityMatrix> preds;
  preds.reserve(members.size());
  for (const auto* m : members) preds.push_back(m->predict(texts));
  return combine(std::move(preds), combiner, threshold, stacker);
}

std::vector<std::unique_ptr<Predictor>> load_members(const EnsembleSpec& spec) {
  spec.validate();
  std::vector<std::string> missing;
  for (const auto& m : spec.members)
    if (!std::filesystem::exists(m / "config.json") || !std::filesystem::exists(m / "weights.bin"))
      missing.push_back(m.string());
  if (!missing.empty()) throw ConfigError("ensemble '" + spec.name + "': missing member checkpoints: " + join(missing, ", "));
  std::vector<std::unique_ptr<Predictor>> out;
  for (const auto& m : spec.members) out.push_back(std::make_unique<Checkpoint>(Checkpoint::load(m)));
  return out;
}

EnsembleOutput run_ensemble(const EnsembleSpec& spec, std::span<const std::string> texts) {
  const auto members = load_members(spec);
  std::optional<StackerModel> stacker;
  if (spec.combiner == Combiner::Stacker) {
    if (!std::filesystem::exists(spec.stacker)) throw ConfigError("stacker file not found: " + spec.stacker.string());
    stacker = StackerModel::from_json(read_file(spec.stacker));
  }
  std::vector<const Predictor*> ptrs;
  for (const auto& m : members) ptrs.push_back(m.get());
  return run_ensemble(ptrs, spec.combiner, spec.threshold, texts, stacker ? &*stacker : nullptr);
}

}  // namespace ctlab
