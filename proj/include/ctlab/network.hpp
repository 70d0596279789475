#pragma once

#include "ctlab/random.hpp"
#include "ctlab/types.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ctlab {

/// Mean-pooled embedding encoder with two tanh layers and four sigmoid heads.
///
///   pooled = mean_j E[token_j]
///   h1 = tanh(W1 pooled + b1),  h2 = tanh(W2 h1 + b2)
///   p = sigmoid(Wo h2 + bo)
struct ClassifierNet {
  Eigen::MatrixXd embedding;  // vocab x embed
  Eigen::MatrixXd w1;         // hidden x embed
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // hidden x hidden
  Eigen::VectorXd b2;
  Eigen::MatrixXd wo;  // 4 x hidden
  Eigen::VectorXd bo;

  ClassifierNet() = default;
  ClassifierNet(int vocab, int embed, int hidden, Rng& rng, double embed_stddev = 0.1);

  int vocab_size() const { return static_cast<int>(embedding.rows()); }
  int embed_dim() const { return static_cast<int>(embedding.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }

  Eigen::VectorXd pooled(std::span<const int> ids) const;
  ClassVector<double> forward(std::span<const int> ids) const;

  void save(const std::filesystem::path& file) const;
  static ClassifierNet load(const std::filesystem::path& file);
};

/// Positive-weighted binary cross-entropy summed over the four heads.
double weighted_bce(const ClassVector<double>& prob, const LabelVector& y, const std::array<double, kNumClasses>& pos_weight);

/// Adam over a ClassifierNet. Embedding rows are updated lazily (only rows seen in the batch).
class AdamTrainer {
 public:
  AdamTrainer(const ClassifierNet& net, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
              double eps = 1e-8);

  /// One optimizer step on a minibatch; returns the mean batch loss.
  double step(ClassifierNet& net, std::span<const std::vector<int>* const> inputs, std::span<const LabelVector> labels,
              const std::array<double, kNumClasses>& pos_weight);

 private:
  struct Moments {
    Eigen::MatrixXd m, v;
  };
  void update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Moments& mom);
  void update(Eigen::VectorXd& param, const Eigen::VectorXd& grad, Moments& mom);

  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Moments m_w1_, m_b1_, m_w2_, m_b2_, m_wo_, m_bo_;
  Eigen::MatrixXd emb_m_, emb_v_;
};

}  // namespace ctlab
