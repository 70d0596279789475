#include "ctlab/network.hpp"

#include "ctlab/error.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace ctlab {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'L', 'N', 'E', 'T', '0', '1'};

void xavier(Eigen::MatrixXd& m, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-a, a);
}

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  const std::int64_t dims[2] = {m.rows(), m.cols()};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd read_matrix(std::ifstream& in) {
  std::int64_t dims[2] = {0, 0};
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || dims[0] < 0 || dims[1] < 0 || dims[0] > (1LL << 24) || dims[1] > (1LL << 16))
    throw ValidationError("corrupt weights file");
  Eigen::MatrixXd m(dims[0], dims[1]);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw ValidationError("truncated weights file");
  return m;
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

ClassifierNet::ClassifierNet(int vocab, int embed, int hidden, Rng& rng, double embed_stddev)
    : embedding(vocab, embed),
      w1(hidden, embed),
      b1(Eigen::VectorXd::Zero(hidden)),
      w2(hidden, hidden),
      b2(Eigen::VectorXd::Zero(hidden)),
      wo(kNumClasses, hidden),
      bo(Eigen::VectorXd::Zero(kNumClasses)) {
  for (Eigen::Index j = 0; j < embedding.cols(); ++j)
    for (Eigen::Index i = 0; i < embedding.rows(); ++i) embedding(i, j) = rng.normal(0.0, embed_stddev);
  xavier(w1, rng);
  xavier(w2, rng);
  xavier(wo, rng);
}

Eigen::VectorXd ClassifierNet::pooled(std::span<const int> ids) const {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(embedding.cols());
  if (ids.empty()) return p;
  for (int id : ids) p += embedding.row(id).transpose();
  return p / static_cast<double>(ids.size());
}

ClassVector<double> ClassifierNet::forward(std::span<const int> ids) const {
  const Eigen::VectorXd h1 = (w1 * pooled(ids) + b1).array().tanh();
  const Eigen::VectorXd h2 = (w2 * h1 + b2).array().tanh();
  const Eigen::VectorXd z = wo * h2 + bo;
  ClassVector<double> p;
  for (int c = 0; c < kNumClasses; ++c) p(c) = sigmoid(z(c));
  return p;
}

void ClassifierNet::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + file.string());
  out.write(kMagic, sizeof kMagic);
  write_matrix(out, embedding);
  write_matrix(out, w1);
  write_matrix(out, b1);
  write_matrix(out, w2);
  write_matrix(out, b2);
  write_matrix(out, wo);
  write_matrix(out, bo);
}

ClassifierNet ClassifierNet::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open weights " + file.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ValidationError("not a weights file: " + file.string());
  ClassifierNet net;
  net.embedding = read_matrix(in);
  net.w1 = read_matrix(in);
  net.b1 = read_matrix(in);
  net.w2 = read_matrix(in);
  net.b2 = read_matrix(in);
  net.wo = read_matrix(in);
  net.bo = read_matrix(in);
  if (net.w1.cols() != net.embedding.cols() || net.w2.cols() != net.w1.rows() || net.wo.rows() != kNumClasses)
    throw ValidationError("inconsistent layer shapes in " + file.string());
  return net;
}

double weighted_bce(const ClassVector<double>& prob, const LabelVector& y, const std::array<double, kNumClasses>& w) {
  constexpr double kEps = 1e-12;
  double loss = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double p = std::clamp(prob(c), kEps, 1.0 - kEps);
    loss -= y[c] ? w[c] * std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

AdamTrainer::AdamTrainer(const ClassifierNet& net, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  auto init = [](Moments& m, Eigen::Index r, Eigen::Index c) {
    m.m = Eigen::MatrixXd::Zero(r, c);
    m.v = Eigen::MatrixXd::Zero(r, c);
  };
  init(m_w1_, net.w1.rows(), net.w1.cols());
  init(m_b1_, net.b1.size(), 1);
  init(m_w2_, net.w2.rows(), net.w2.cols());
  init(m_b2_, net.b2.size(), 1);
  init(m_wo_, net.wo.rows(), net.wo.cols());
  init(m_bo_, net.bo.size(), 1);
  emb_m_ = Eigen::MatrixXd::Zero(net.embedding.rows(), net.embedding.cols());
  emb_v_ = Eigen::MatrixXd::Zero(net.embedding.rows(), net.embedding.cols());
}

void AdamTrainer::update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Moments& mom) {
  mom.m = beta1_ * mom.m + (1 - beta1_) * grad;
  mom.v = beta2_ * mom.v + (1 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1 - std::pow(beta2_, static_cast<double>(t_));
  param.array() -= lr_ * (mom.m.array() / c1) / ((mom.v.array() / c2).sqrt() + eps_);
}

void AdamTrainer::update(Eigen::VectorXd& param, const Eigen::VectorXd& grad, Moments& mom) {
  Eigen::MatrixXd p = param;
  update(p, Eigen::MatrixXd(grad), mom);
  param = p;
}

double AdamTrainer::step(ClassifierNet& net, std::span<const std::vector<int>* const> inputs,
                         std::span<const LabelVector> labels, const std::array<double, kNumClasses>& pos_weight) {
  if (inputs.size() != labels.size() || inputs.empty()) throw ValidationError("AdamTrainer::step: bad batch");
  const double scale = 1.0 / static_cast<double>(inputs.size());
  Eigen::MatrixXd g_w1 = Eigen::MatrixXd::Zero(net.w1.rows(), net.w1.cols());
  Eigen::VectorXd g_b1 = Eigen::VectorXd::Zero(net.b1.size());
  Eigen::MatrixXd g_w2 = Eigen::MatrixXd::Zero(net.w2.rows(), net.w2.cols());
  Eigen::VectorXd g_b2 = Eigen::VectorXd::Zero(net.b2.size());
  Eigen::MatrixXd g_wo = Eigen::MatrixXd::Zero(net.wo.rows(), net.wo.cols());
  Eigen::VectorXd g_bo = Eigen::VectorXd::Zero(net.bo.size());
  std::map<int, Eigen::RowVectorXd> g_emb;

  double loss = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto& ids = *inputs[k];
    const Eigen::VectorXd x = net.pooled(ids);
    const Eigen::VectorXd h1 = (net.w1 * x + net.b1).array().tanh();
    const Eigen::VectorXd h2 = (net.w2 * h1 + net.b2).array().tanh();
    const Eigen::VectorXd z = net.wo * h2 + net.bo;
    ClassVector<double> p;
    Eigen::VectorXd dz(kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) {
      p(c) = sigmoid(z(c));
      const double y = labels[k][c];
      const double w = pos_weight[c];
      dz(c) = scale * (p(c) * (w * y + 1 - y) - w * y);
    }
    loss += weighted_bce(p, labels[k], pos_weight);

    g_wo.noalias() += dz * h2.transpose();
    g_bo += dz;
    const Eigen::VectorXd dz2 = (net.wo.transpose() * dz).array() * (1 - h2.array().square());
    g_w2.noalias() += dz2 * h1.transpose();
    g_b2 += dz2;
    const Eigen::VectorXd dz1 = (net.w2.transpose() * dz2).array() * (1 - h1.array().square());
    g_w1.noalias() += dz1 * x.transpose();
    g_b1 += dz1;
    if (!ids.empty()) {
      const Eigen::RowVectorXd dx = (net.w1.transpose() * dz1).transpose() / static_cast<double>(ids.size());
      for (int id : ids) {
        auto [it, fresh] = g_emb.try_emplace(id, dx);
        if (!fresh) it->second += dx;
      }
    }
  }

  ++t_;
  update(net.w1, g_w1, m_w1_);
  update(net.b1, g_b1, m_b1_);
  update(net.w2, g_w2, m_w2_);
  update(net.b2, g_b2, m_b2_);
  update(net.wo, g_wo, m_wo_);
  update(net.bo, g_bo, m_bo_);
  const double c1 = 1 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [id, g] : g_emb) {
    emb_m_.row(id) = beta1_ * emb_m_.row(id) + (1 - beta1_) * g;
    emb_v_.row(id) = beta2_ * emb_v_.row(id) + (1 - beta2_) * g.cwiseProduct(g);
    net.embedding.row(id).array() -=
        lr_ * (emb_m_.row(id).array() / c1) / ((emb_v_.row(id).array() / c2).sqrt() + eps_);
  }
  return loss * scale;
}

}  // namespace ctlab
