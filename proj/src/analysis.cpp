// Copyright 2026 The MaIL Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mail/harness.h"

namespace mail {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<AblationRow> run_occlusion_ablation(const Checkpoint& ckpt, const std::vector<double>& rates,
                                                std::size_t episodes, std::uint64_t seed) {
  std::vector<AblationRow> rows;
  for (double rate : rates) rows.push_back({rate, evaluate_checkpoint(ckpt, episodes, seed, rate).success_rate});
  return rows;
}

std::vector<AblationRow> run_datasize_ablation(const TrainConfig& cfg, const DemoDataset& ds,
                                               const std::vector<double>& fractions, std::size_t episodes,
                                               std::uint64_t seed) {
  std::vector<double> sorted = fractions;
  std::sort(sorted.begin(), sorted.end());
  std::vector<AblationRow> rows;
  for (double f : sorted) {
    const DemoDataset sub = subsample_dataset(ds, f, cfg.seed);
    const TrainResult trained = train(cfg, sub);
    rows.push_back({f, evaluate_checkpoint(trained.checkpoint, episodes, seed).success_rate});
  }
  return rows;
}

void write_ablation(const std::vector<AblationRow>& rows, const std::string& column, const std::string& prefix) {
  std::string csv = column + ",success_rate\n";
  std::string dat = "# " + column + " success_rate\n";
  for (const auto& r : rows) {
    csv += fmt(r.setting) + "," + fmt(r.success_rate) + "\n";
    dat += fmt(r.setting) + " " + fmt(r.success_rate) + "\n";
  }
  write_text_atomic(prefix + ".csv", csv);
  write_text_atomic(prefix + ".dat", dat);
}

void pca_project(const std::vector<double>& data, std::size_t rows, std::size_t dim, std::vector<double>& out,
                 std::vector<double>& explained) {
  if (rows == 0 || dim == 0 || data.size() != rows * dim) throw DimensionError("pca_project: empty or ragged data");
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const Matrix> x(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Matrix centered = x.rowwise() - mu;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(std::max<std::size_t>(rows - 1, 1));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();
  const std::size_t k = std::min<std::size_t>(2, dim);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), 2);
  explained.assign(2, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const Eigen::Index src = static_cast<Eigen::Index>(dim - 1 - c);
    Eigen::VectorXd v = vectors.col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    basis.col(static_cast<Eigen::Index>(c)) = v;
    explained[c] = std::max(values(src), 0.0);
  }
  const Eigen::MatrixXd proj = centered * basis;
  out.resize(rows * 2);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r * 2] = proj(static_cast<Eigen::Index>(r), 0);
    out[r * 2 + 1] = proj(static_cast<Eigen::Index>(r), 1);
  }
}

LatentExport compute_latents(const TrainedPolicy& policy, const DemoDataset& ds, bool pca) {
  const PolicyNetworkConfig& nc = policy.network().config();
  if (ds.obs_dim != nc.obs_dim || ds.act_dim != nc.act_dim) {
    throw DimensionError("export_latents: dataset dims " + std::to_string(ds.obs_dim) + "/" + std::to_string(ds.act_dim) +
                         " do not match the checkpoint's " + std::to_string(nc.obs_dim) + "/" + std::to_string(nc.act_dim));
  }
  const WindowedSamples samples = make_windowed_samples(ds, nc.history, nc.horizon);
  LatentExport out;
  out.rows = samples.count();
  out.dim = nc.model_dim;
  constexpr std::size_t kChunk = 256;
  for (std::size_t b0 = 0; b0 < out.rows; b0 += kChunk) {
    const std::size_t bsz = std::min(kChunk, out.rows - b0);
    const std::size_t win = nc.history * nc.obs_dim;
    std::vector<double> s(samples.windows.begin() + static_cast<std::ptrdiff_t>(b0 * win),
                          samples.windows.begin() + static_cast<std::ptrdiff_t>((b0 + bsz) * win));
    const Tensor z = policy.network().latent(Tensor({bsz, nc.history, nc.obs_dim}, std::move(s)),
                                             Tensor::zeros({bsz, nc.horizon, nc.act_dim}),
                                             std::vector<std::size_t>(bsz, 1));
    const auto zd = z.data();
    out.latents.insert(out.latents.end(), zd.begin(), zd.end());
  }
  if (pca) pca_project(out.latents, out.rows, out.dim, out.projection, out.explained);
  return out;
}

void export_latents(const Checkpoint& ckpt, const DemoDataset& ds, const std::string& path, bool pca) {
  const TrainedPolicy policy(ckpt);
  const LatentExport lat = compute_latents(policy, ds, pca);
  std::string text = "trajectory,step";
  for (std::size_t c = 0; c < lat.dim; ++c) text += ",z" + std::to_string(c);
  if (pca) text += ",pc1,pc2";
  text += "\n";
  std::size_t row = 0;
  for (std::size_t t = 0; t < ds.size(); ++t) {
    for (std::size_t s = 0; s < ds.trajectories[t].steps(); ++s, ++row) {
      text += std::to_string(t) + "," + std::to_string(s);
      for (std::size_t c = 0; c < lat.dim; ++c) text += "," + fmt(lat.latents[row * lat.dim + c]);
      if (pca) text += "," + fmt(lat.projection[row * 2]) + "," + fmt(lat.projection[row * 2 + 1]);
      text += "\n";
    }
  }
  write_text_atomic(path, text);
}

}  // namespace mail
