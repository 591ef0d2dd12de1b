// src/evaluation.cpp

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

#include "accentvae/evaluation.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/SVD>


namespace accentvae {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Eigen::VectorXd DctII(const Eigen::VectorXd &x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) s += x(i) * std::cos(kPi * (i + 0.5) * k / n);
    out(k) = s * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
  }
  return out;
}

Eigen::MatrixXd MelCepstra(const Eigen::MatrixXf &mel) {
  const Eigen::Index n = mel.cols();
  if (n < kNumCepstra + 1) throw UsageError("mel_cepstra: need at least 14 mel bands");
  // (13 x n) slice of the DCT-II basis for coefficients 1..13
  Eigen::MatrixXd basis(kNumCepstra, n);
  for (int k = 1; k <= kNumCepstra; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      basis(k - 1, i) = std::cos(kPi * (i + 0.5) * k / n) * std::sqrt(2.0 / n);
  return mel.cast<double>() * basis.transpose();
}

DtwResult Dtw(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b) {
  const Eigen::Index n = a.rows(), m = b.rows();
  if (n < 1 || m < 1) throw Error("dtw: empty sequence");
  if (a.cols() != b.cols()) throw Error("dtw: dimension mismatch");
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd cost(n + 1, m + 1);
  Eigen::MatrixXi len(n + 1, m + 1);
  cost.setConstant(inf);
  len.setZero();
  cost(0, 0) = 0;
  for (Eigen::Index i = 1; i <= n; ++i)
    for (Eigen::Index j = 1; j <= m; ++j) {
      const double c = (a.row(i - 1) - b.row(j - 1)).norm();
      // lexicographic (cost, length) minimum over the three predecessors
      double best = cost(i - 1, j - 1);
      int best_len = len(i - 1, j - 1);
      for (auto [pi, pj] : {std::pair{i - 1, j}, std::pair{i, j - 1}}) {
        if (cost(pi, pj) < best || (cost(pi, pj) == best && len(pi, pj) < best_len)) {
          best = cost(pi, pj);
          best_len = len(pi, pj);
        }
      }
      cost(i, j) = best + c;
      len(i, j) = best_len + 1;
    }
  DtwResult r;
  r.total_cost = cost(n, m);
  Eigen::Index i = n, j = m;
  while (i > 0 && j > 0) {
    r.path.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1));
    const double c = (a.row(i - 1) - b.row(j - 1)).norm();
    const double prev = cost(i, j) - c;
    const int prev_len = len(i, j) - 1;
    auto matches = [&](Eigen::Index pi, Eigen::Index pj) {
      return len(pi, pj) == prev_len && std::abs(cost(pi, pj) - prev) <= 1e-12 * (1 + std::abs(prev));
    };
    if (matches(i - 1, j - 1)) {
      --i;
      --j;
    } else if (matches(i - 1, j)) {
      --i;
    } else if (matches(i, j - 1)) {
      --j;
    } else {
      --i;
      --j;
    }
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

double Mcd(const Eigen::MatrixXd &reference, const Eigen::MatrixXd &predicted) {
  if (reference.cols() != predicted.cols()) throw UsageError("mcd: coefficient dimension mismatch");
  if (reference.rows() < 1 || predicted.rows() < 1) throw UsageError("mcd: empty sequence");
  const DtwResult d = Dtw(reference, predicted);
  // the DP stores cost and length, so the mean follows without re-summing
  return kMcdScale * d.total_cost / static_cast<double>(d.path.size());
}

int EditDistance(const std::vector<std::string> &a, const std::vector<std::string> &b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> SplitWords(const std::string &text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

double Wer(const std::string &reference, const std::string &hypothesis) {
  const auto ref = SplitWords(reference);
  if (ref.empty()) throw UsageError("wer: reference has no words");
  return static_cast<double>(EditDistance(ref, SplitWords(hypothesis))) /
         static_cast<double>(ref.size());
}

void LogisticProbe::Fit(const Eigen::MatrixXd &x, const std::vector<int> &labels, int num_classes,
                        double l2, int iterations) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (n == 0 || static_cast<Eigen::Index>(labels.size()) != n) throw Error("probe: bad training set");
  mean_ = x.colwise().mean();
  scale_ = ((x.rowwise() - mean_).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(scale_(j) > 1e-12)) scale_(j) = 1.0;
  Eigen::MatrixXd z(n, d + 1);
  z.leftCols(d) = (x.rowwise() - mean_).array().rowwise() / scale_.array();
  z.col(d).setOnes();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, num_classes);
  for (Eigen::Index i = 0; i < n; ++i) y(i, labels[i]) = 1.0;
  weights_ = Eigen::MatrixXd::Zero(d + 1, num_classes);
  const double lr = 0.5;
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd logits = z * weights_;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - mx).exp().matrix();
      logits.row(i) /= logits.row(i).sum();
    }
    Eigen::MatrixXd grad = z.transpose() * (logits - y) / static_cast<double>(n);
    grad.topRows(d) += l2 * weights_.topRows(d);
    weights_ -= lr * grad;
  }
}

Eigen::MatrixXd LogisticProbe::Probabilities(const Eigen::MatrixXd &x) const {
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd z(x.rows(), d + 1);
  z.leftCols(d) = (x.rowwise() - mean_).array().rowwise() / scale_.array();
  z.col(d).setOnes();
  Eigen::MatrixXd p = z * weights_;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double mx = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

std::vector<int> LogisticProbe::Predict(const Eigen::MatrixXd &x) const {
  const Eigen::MatrixXd p = Probabilities(x);
  std::vector<int> out(p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i).maxCoeff(&out[i]);
  return out;
}

double ProbeAccuracy(const Eigen::MatrixXd &features, const std::vector<std::string> &labels,
                     std::uint64_t seed) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows())
    throw Error("probe: label count mismatch");
  std::map<std::string, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
  if (by_class.size() < 2) throw DataError("probe: need at least 2 classes");
  std::mt19937_64 rng(seed);
  std::vector<int> train, test, train_y, test_y;
  int cls = 0;
  for (auto &[name, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t half = (members.size() + 1) / 2;
    if (half == 0 || half == members.size())
      throw DataError("probe: class '" + name + "' is absent from one half of the split");
    for (std::size_t k = 0; k < members.size(); ++k) {
      (k < half ? train : test).push_back(members[k]);
      (k < half ? train_y : test_y).push_back(cls);
    }
    ++cls;
  }
  auto rows = [&](const std::vector<int> &idx) {
    Eigen::MatrixXd m(idx.size(), features.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) m.row(i) = features.row(idx[i]);
    return m;
  };
  LogisticProbe probe;
  probe.Fit(rows(train), train_y, cls);
  const auto pred = probe.Predict(rows(test));
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test_y[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

namespace {

Eigen::MatrixXd StackMeans(const EmbeddingStore &store, EmbeddingKind which) {
  Eigen::MatrixXd x(store.records().size(), store.latent_dim());
  for (std::size_t i = 0; i < store.records().size(); ++i) {
    const auto &r = store.records()[i];
    x.row(i) = (which == EmbeddingKind::kSpeaker ? r.speaker.mean : r.accent.mean)
                   .cast<double>()
                   .transpose();
  }
  return x;
}

}  // namespace

ProbeReport ProbeDisentanglement(const EmbeddingStore &store, std::uint64_t seed) {
  std::vector<std::string> speakers, accents;
  for (const auto &r : store.records()) {
    speakers.push_back(r.speaker_id);
    accents.push_back(r.accent_id);
  }
  const Eigen::MatrixXd zs = StackMeans(store, EmbeddingKind::kSpeaker);
  const Eigen::MatrixXd za = StackMeans(store, EmbeddingKind::kAccent);
  ProbeReport rep;
  rep.speaker_on_speaker_latent = ProbeAccuracy(zs, speakers, seed);
  rep.accent_on_speaker_latent = ProbeAccuracy(zs, accents, seed);
  rep.accent_on_accent_latent = ProbeAccuracy(za, accents, seed);
  return rep;
}

ProjectionMethod ParseProjectionMethod(const std::string &name) {
  if (name == "tsne") return ProjectionMethod::kTsne;
  if (name == "pca") return ProjectionMethod::kPca;
  throw UsageError("unknown projection method '" + name + "' (expected tsne or pca)");
}

EmbeddingKind ParseEmbeddingKind(const std::string &name) {
  if (name == "speaker") return EmbeddingKind::kSpeaker;
  if (name == "accent") return EmbeddingKind::kAccent;
  throw UsageError("unknown embedding kind '" + name + "' (expected speaker or accent)");
}

Eigen::MatrixXd Pca2(const Eigen::MatrixXd &x) {
  if (x.rows() < 1) throw Error("pca: no rows");
  const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(x.cols(), 2);
  const Eigen::Index k = std::min<Eigen::Index>(2, svd.matrixV().cols());
  v.leftCols(k) = svd.matrixV().leftCols(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg;
    v.col(c).cwiseAbs().maxCoeff(&arg);
    if (v(arg, c) < 0) v.col(c) = -v.col(c);
  }
  return centred * v;
}

double DefaultPerplexity(std::size_t n) { return std::min(30.0, static_cast<double>(n) / 4.0); }

Eigen::MatrixXd Tsne2(const Eigen::MatrixXd &x, double perplexity, std::uint64_t seed,
                      int iterations) {
  const Eigen::Index n = x.rows();
  if (!(perplexity >= 1.0) || perplexity > static_cast<double>(n - 1))
    throw UsageError("t-SNE perplexity " + std::to_string(perplexity) + " is invalid for " +
                     std::to_string(n) + " points (need 1 <= perplexity <= n - 1); use --method pca");
  // squared distances
  Eigen::MatrixXd d2(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) d2(i, j) = (x.row(i) - x.row(j)).squaredNorm();

  // conditional affinities by bisection on the precision
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double lo = 0, hi = std::numeric_limits<double>::infinity(), beta = 1.0;
    Eigen::VectorXd row(n);
    for (int it = 0; it < 200; ++it) {
      double sum = 0, dsum = 0;
      const double dmin = [&] {
        double m = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != i) m = std::min(m, d2(i, j));
        return m;
      }();
      for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = j == i ? 0.0 : std::exp(-beta * (d2(i, j) - dmin));
        sum += row(j);
        dsum += row(j) * (d2(i, j) - dmin);
      }
      const double h = std::log(sum) + beta * dsum / sum;
      row /= sum;
      if (std::abs(h - target) < 1e-6) break;
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2 : (beta + hi) / 2;
      } else {
        hi = beta;
        beta = (beta + lo) / 2;
      }
    }
    p.row(i) = row.transpose();
  }
  p = (p + p.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1e-4);
  Eigen::MatrixXd y(n, 2), update = Eigen::MatrixXd::Zero(n, 2), gains = Eigen::MatrixXd::Ones(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) y(i, c) = g(rng);

  const double eta = 200.0;
  for (int it = 0; it < iterations; ++it) {
    const double exaggeration = it < 250 ? 12.0 : 1.0;
    const double momentum = it < 250 ? 0.5 : 0.8;
    Eigen::MatrixXd num(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        num(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
    const double z = num.sum();
    const Eigen::MatrixXd q = (num / z).cwiseMax(1e-12);
    const Eigen::MatrixXd w = (exaggeration * p - q).cwiseProduct(num);
    Eigen::MatrixXd grad(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
      grad.row(i) = 4.0 * (w.row(i).sum() * y.row(i) - w.row(i) * y);
    for (Eigen::Index k = 0; k < grad.size(); ++k) {
      const bool same = (grad(k) > 0) == (update(k) > 0);
      gains(k) = std::max(same ? gains(k) * 0.8 : gains(k) + 0.2, 0.01);
      update(k) = momentum * update(k) - eta * gains(k) * grad(k);
      y(k) += update(k);
    }
    y = y.rowwise() - y.colwise().mean();
  }
  return y;
}

Projection2D ProjectEmbeddings(const EmbeddingStore &store, EmbeddingKind which,
                               ProjectionMethod method, std::uint64_t seed, double perplexity) {
  const std::size_t n = store.records().size();
  if (n < 3) throw UsageError("project_embeddings: need at least 3 embeddings");
  const Eigen::MatrixXd x = StackMeans(store, which);
  Projection2D out;
  out.method = method;
  out.seed = seed;
  Eigen::MatrixXd y;
  if (method == ProjectionMethod::kPca) {
    y = Pca2(x);
  } else {
    out.perplexity = perplexity > 0 ? perplexity : DefaultPerplexity(n);
    y = Tsne2(x, out.perplexity, seed);
  }
  if (!y.allFinite()) throw NumericalError("project_embeddings: non-finite coordinates");
  for (std::size_t i = 0; i < n; ++i) {
    const auto &r = store.records()[i];
    out.points.push_back({y(i, 0), y(i, 1), r.speaker_id, r.accent_id});
  }
  return out;
}

void WriteProjectionCsv(const std::filesystem::path &path, const Projection2D &projection) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << "x,y,speaker_id,accent_id\n" << std::setprecision(10);
  for (const auto &p : projection.points)
    os << p.x << ',' << p.y << ',' << p.speaker_id << ',' << p.accent_id << '\n';
}

void WritePng(const std::filesystem::path &path, int width, int height,
              const std::vector<unsigned char> &rgb) {
  if (static_cast<std::size_t>(width) * height * 3 != rgb.size()) throw Error("png: size mismatch");
  std::FILE *fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, rgb.data() + static_cast<std::size_t>(y) * width * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw DataError("failed writing " + path.string());
}

void WriteProjectionPng(const std::filesystem::path &path, const Projection2D &projection,
                        bool color_by_accent, int size) {
  static const unsigned char kPalette[][3] = {
      {31, 119, 180}, {255, 127, 14}, {44, 160, 44},   {214, 39, 40},  {148, 103, 189},
      {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207}};
  std::vector<unsigned char> rgb(static_cast<std::size_t>(size) * size * 3, 255);
  std::map<std::string, int> color;
  for (const auto &p : projection.points) {
    const auto &key = color_by_accent ? p.accent_id : p.speaker_id;
    color.emplace(key, 0);
  }
  int k = 0;
  for (auto &[_, c] : color) c = k++;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  if (!projection.points.empty()) {
    xmin = xmax = projection.points[0].x;
    ymin = ymax = projection.points[0].y;
  }
  for (const auto &p : projection.points) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int margin = size / 12;
  auto put = [&](int x, int y, const unsigned char *c) {
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    std::copy(c, c + 3, rgb.begin() + (static_cast<long>(y) * size + x) * 3);
  };
  static const unsigned char kBlack[3] = {0, 0, 0};
  for (int i = margin / 2; i < size - margin / 2; ++i) {
    put(i, margin / 2, kBlack);
    put(i, size - margin / 2, kBlack);
    put(margin / 2, i, kBlack);
    put(size - margin / 2, i, kBlack);
  }
  auto scale = [&](double v, double lo, double hi) {
    return hi > lo ? (v - lo) / (hi - lo) : 0.5;
  };
  for (const auto &p : projection.points) {
    const int px = margin + static_cast<int>(scale(p.x, xmin, xmax) * (size - 2 * margin));
    const int py = size - margin - static_cast<int>(scale(p.y, ymin, ymax) * (size - 2 * margin));
    const auto *c = kPalette[color[color_by_accent ? p.accent_id : p.speaker_id] % 10];
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) put(px + dx, py + dy, c);
  }
  WritePng(path, size, size, rgb);
}

Eigen::RowVectorXd MelAccentOracle::Features(const Eigen::MatrixXf &mel, int num_tokens) {
  if (mel.rows() < 1 || num_tokens < 1) throw Error("accent oracle: empty input");
  Eigen::RowVectorXd f(mel.cols() + 1);
  f.head(mel.cols()) = mel.cast<double>().colwise().mean();
  f(mel.cols()) = std::log(static_cast<double>(mel.rows()) / num_tokens);
  return f;
}

void MelAccentOracle::Fit(const std::vector<const Eigen::MatrixXf *> &mels,
                          const std::vector<int> &num_tokens, const std::vector<int> &accents,
                          int num_accents) {
  if (mels.empty() || mels.size() != num_tokens.size() || mels.size() != accents.size())
    throw Error("accent oracle: inconsistent training set");
  Eigen::MatrixXd x(mels.size(), mels[0]->cols() + 1);
  for (std::size_t i = 0; i < mels.size(); ++i) x.row(i) = Features(*mels[i], num_tokens[i]);
  probe_.Fit(x, accents, num_accents);
}

int MelAccentOracle::Predict(const Eigen::MatrixXf &mel, int num_tokens) const {
  return probe_.Predict(Features(mel, num_tokens))[0];
}

void MetricReport::Finalize() {
  mean_mcd = 0;
  for (const auto &m : mcd) mean_mcd += m.mcd;
  if (!mcd.empty()) mean_mcd /= static_cast<double>(mcd.size());
  corpus_wer = 0;
  for (const auto &w : wer) corpus_wer += w.wer;
  if (!wer.empty()) corpus_wer /= static_cast<double>(wer.size());
}

nlohmann::json MetricReport::ToJson() const {
  nlohmann::json j;
  j["split"] = split;
  j["checkpoint_hash"] = checkpoint_hash;
  j["mean_mcd"] = mean_mcd;
  j["corpus_wer"] = corpus_wer;
  j["num_mcd_pairs"] = mcd.size();
  j["num_wer_items"] = wer.size();
  nlohmann::json per_mcd = nlohmann::json::array(), per_wer = nlohmann::json::array();
  for (const auto &m : mcd) per_mcd.push_back({{"utterance_id", m.utterance_id}, {"mcd", m.mcd}});
  for (const auto &w : wer) per_wer.push_back({{"utterance_id", w.utterance_id}, {"wer", w.wer}});
  j["mcd"] = per_mcd;
  j["wer"] = per_wer;
  if (probes) {
    j["probes"] = {{"speaker_on_speaker_latent", probes->speaker_on_speaker_latent},
                   {"accent_on_speaker_latent", probes->accent_on_speaker_latent},
                   {"accent_on_accent_latent", probes->accent_on_accent_latent}};
  }
  j["skipped"] = skipped;
  return j;
}

void MetricReport::WriteCsv(const std::filesystem::path &mcd_csv,
                            const std::filesystem::path &wer_csv) const {
  std::ofstream a(mcd_csv, std::ios::trunc), b(wer_csv, std::ios::trunc);
  if (!a || !b) throw DataError("cannot write metric CSVs");
  a << "utterance_id,mcd\n" << std::setprecision(10);
  for (const auto &m : mcd) a << m.utterance_id << ',' << m.mcd << '\n';
  b << "utterance_id,wer,reference,hypothesis\n" << std::setprecision(10);
  auto quote = [](const std::string &s) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (const auto &w : wer)
    b << w.utterance_id << ',' << w.wer << ',' << quote(w.reference) << ',' << quote(w.hypothesis)
      << '\n';
}

}  // namespace accentvae
