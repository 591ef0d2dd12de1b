// include/accentvae/evaluation.hpp

// Copyright 2026 The accentvae Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Objective metrics (MCD, WER), linear probes on stored embeddings and 2-D
// embedding projections.

#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "accentvae/inference.hpp"
#include "json.hpp"

namespace accentvae {

/// 10 * sqrt(2) / ln 10.
inline const double kMcdScale = 10.0 * std::sqrt(2.0) / std::log(10.0);
inline constexpr int kNumCepstra = 13;

/// Orthonormal DCT-II of one vector.
Eigen::VectorXd DctII(const Eigen::VectorXd &x);

/// Per-frame orthonormal DCT-II of the log-mel, coefficients 1..13.
Eigen::MatrixXd MelCepstra(const Eigen::MatrixXf &mel);

struct DtwResult {
  std::vector<std::pair<int, int>> path;
  double total_cost = 0.0;
};

/// DTW under Euclidean frame cost with steps (1,0), (0,1), (1,1). Among
/// equal-cost alignments the shortest wins, which keeps the result symmetric.
DtwResult Dtw(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b);

/// kMcdScale times the mean aligned-frame Euclidean distance.
double Mcd(const Eigen::MatrixXd &reference, const Eigen::MatrixXd &predicted);

/// Word-level Levenshtein distance with unit costs.
int EditDistance(const std::vector<std::string> &a, const std::vector<std::string> &b);
std::vector<std::string> SplitWords(const std::string &text);
/// edit distance / reference word count.
double Wer(const std::string &reference, const std::string &hypothesis);

/// Multinomial logistic regression on standardized features (L2-penalized,
/// full-batch gradient descent).
class LogisticProbe {
 public:
  void Fit(const Eigen::MatrixXd &x, const std::vector<int> &labels, int num_classes,
           double l2 = 1e-3, int iterations = 500);
  std::vector<int> Predict(const Eigen::MatrixXd &x) const;
  Eigen::MatrixXd Probabilities(const Eigen::MatrixXd &x) const;

 private:
  Eigen::RowVectorXd mean_, scale_;
  Eigen::MatrixXd weights_;  // (features + 1) x classes, last row is the bias
};

/// Fits on a seeded, stratified half of the rows and returns held-out
/// accuracy. Throws DataError when a class is absent from either half.
double ProbeAccuracy(const Eigen::MatrixXd &features, const std::vector<std::string> &labels,
                     std::uint64_t seed);

struct ProbeReport {
  double speaker_on_speaker_latent = 0;
  double accent_on_speaker_latent = 0;
  double accent_on_accent_latent = 0;
};

/// Probes on the stored posterior means against the records' ground-truth
/// speaker and accent labels.
ProbeReport ProbeDisentanglement(const EmbeddingStore &store, std::uint64_t seed = 0);

enum class ProjectionMethod { kTsne, kPca };
enum class EmbeddingKind { kSpeaker, kAccent };

ProjectionMethod ParseProjectionMethod(const std::string &name);
EmbeddingKind ParseEmbeddingKind(const std::string &name);

struct Projection2D {
  struct Point {
    double x = 0, y = 0;
    std::string speaker_id, accent_id;
  };
  std::vector<Point> points;
  ProjectionMethod method = ProjectionMethod::kPca;
  double perplexity = 0;
  std::uint64_t seed = 0;
};

/// Rows projected onto their top two principal components. Each
/// component's sign is chosen so its largest-magnitude loading is positive.
Eigen::MatrixXd Pca2(const Eigen::MatrixXd &x);

/// Exact t-SNE: early exaggeration 12 for 250 iterations, 1000 iterations.
/// Throws UsageError (suggesting PCA) unless 1 <= perplexity <= n - 1.
Eigen::MatrixXd Tsne2(const Eigen::MatrixXd &x, double perplexity, std::uint64_t seed,
                      int iterations = 1000);

double DefaultPerplexity(std::size_t n);

/// One point per stored utterance posterior mean of the chosen latent.
/// perplexity <= 0 selects DefaultPerplexity.
Projection2D ProjectEmbeddings(const EmbeddingStore &store, EmbeddingKind which,
                               ProjectionMethod method, std::uint64_t seed,
                               double perplexity = 0);

void WriteProjectionCsv(const std::filesystem::path &path, const Projection2D &projection);
/// Scatter plot coloured by accent (or speaker).
void WriteProjectionPng(const std::filesystem::path &path, const Projection2D &projection,
                        bool color_by_accent = true, int size = 480);
/// 8-bit RGB PNG.
void WritePng(const std::filesystem::path &path, int width, int height,
              const std::vector<unsigned char> &rgb);

/// Accent classifier over whole mels: per-band mean plus log frames-per-token.
/// Trained on ground-truth mels, it judges the accent of generated speech.
class MelAccentOracle {
 public:
  void Fit(const std::vector<const Eigen::MatrixXf *> &mels, const std::vector<int> &num_tokens,
           const std::vector<int> &accents, int num_accents);
  int Predict(const Eigen::MatrixXf &mel, int num_tokens) const;
  static Eigen::RowVectorXd Features(const Eigen::MatrixXf &mel, int num_tokens);

 private:
  LogisticProbe probe_;
};

struct MetricReport {
  struct McdItem {
    std::string utterance_id;
    double mcd = 0;
  };
  struct WerItem {
    std::string utterance_id;
    std::string reference, hypothesis;
    double wer = 0;
  };
  std::vector<McdItem> mcd;
  std::vector<WerItem> wer;
  double mean_mcd = 0;
  double corpus_wer = 0;
  std::optional<ProbeReport> probes;
  std::string checkpoint_hash;
  std::string split;
  std::vector<std::string> skipped;

  /// Recomputes the corpus means from the items.
  void Finalize();
  nlohmann::json ToJson() const;
  void WriteCsv(const std::filesystem::path &mcd_csv, const std::filesystem::path &wer_csv) const;
};

}  // namespace accentvae
