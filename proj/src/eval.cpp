#include "awh/eval.hpp"

#include "awh/critic.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace awh {

using nlohmann::json;

EpeResult epe(std::span<const Keypoints3D> pred, std::span<const Keypoints3D> gt) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("epe: " + std::to_string(pred.size()) + " predictions for " +
                                std::to_string(gt.size()) + " ground-truth poses");
  }
  if (pred.empty()) throw std::invalid_argument("epe: no poses");
  EpeResult r;
  r.errors.reserve(pred.size() * kNumKeypoints);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      const double e = (pred[i][k] - gt[i][k]).norm();
      r.errors.push_back(e);
      r.per_joint[k] += e;
      total += e;
    }
  }
  const auto n = static_cast<double>(pred.size());
  for (auto& v : r.per_joint) v /= n;
  r.mean_mm = total / (n * kNumKeypoints);
  return r;
}

std::vector<double> thresholds_20_50() {
  std::vector<double> t;
  for (int v = 20; v <= 50; ++v) t.push_back(v);
  return t;
}

std::vector<double> thresholds_0_30() {
  std::vector<double> t;
  for (int v = 0; v <= 30; ++v) t.push_back(v);
  return t;
}

PckCurve pck_curve(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) throw std::invalid_argument("pck_curve: empty error set");
  if (thresholds.empty()) throw std::invalid_argument("pck_curve: no thresholds");
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) {
      throw std::invalid_argument("pck_curve: thresholds must be strictly increasing");
    }
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  PckCurve curve;
  for (double t : thresholds) {
    const auto hit = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    curve.push_back({t, static_cast<double>(hit) / static_cast<double>(sorted.size())});
  }
  return curve;
}

double auc(const PckCurve& curve) {
  if (curve.size() < 2) throw std::invalid_argument("auc: need at least two curve points");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double w = curve[i].threshold_mm - curve[i - 1].threshold_mm;
    if (!(w > 0.0)) throw std::invalid_argument("auc: thresholds must be strictly increasing");
    area += 0.5 * w * (curve[i].fraction + curve[i - 1].fraction);
  }
  return area / (curve.back().threshold_mm - curve.front().threshold_mm);
}

void EvalReport::validate() const {
  for (std::size_t i = 0; i < pck.size(); ++i) {
    if (!(pck[i].fraction >= 0.0 && pck[i].fraction <= 1.0)) {
      throw std::invalid_argument("eval report: pck fraction outside [0, 1]");
    }
    if (i > 0 && pck[i].fraction < pck[i - 1].fraction) {
      throw std::invalid_argument("eval report: pck curve decreases");
    }
  }
  if (!(auc >= 0.0 && auc <= 1.0)) throw std::invalid_argument("eval report: auc outside [0, 1]");
}

EvalReport make_report(const EpeResult& result, std::span<const double> thresholds) {
  EvalReport r;
  r.mean_epe_mm = result.mean_mm;
  r.per_joint = result.per_joint;
  r.pck = pck_curve(result.errors, thresholds);
  r.auc = auc(r.pck);
  r.samples = static_cast<int64_t>(result.errors.size() / kNumKeypoints);
  return r;
}

json to_json(const EvalReport& r) {
  json pck = json::array();
  for (const auto& p : r.pck) pck.push_back({p.threshold_mm, p.fraction});
  return {{"mean_epe_mm", r.mean_epe_mm}, {"auc", r.auc},     {"pck", pck},
          {"per_joint_epe_mm", r.per_joint}, {"samples", r.samples},
          {"invalid_lifts", r.invalid_lifts}};
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  r.mean_epe_mm = j.at("mean_epe_mm").get<double>();
  r.auc = j.at("auc").get<double>();
  for (const auto& p : j.at("pck")) r.pck.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  r.per_joint = j.at("per_joint_epe_mm").get<std::array<double, kNumKeypoints>>();
  r.samples = j.at("samples").get<int64_t>();
  r.invalid_lifts = j.at("invalid_lifts").get<int64_t>();
  r.validate();
  return r;
}

void write_report(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << to_json(r).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing report " + path.string());
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report " + path.string());
  try {
    return eval_report_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_pck_csv(const PckCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "threshold_mm,fraction\n";
  char line[96];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g\n", p.threshold_mm, p.fraction);
    out << line;
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

PckCurve read_pck_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "threshold_mm,fraction") {
    throw std::runtime_error(path.string() + ": missing header threshold_mm,fraction");
  }
  PckCurve curve;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      curve.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
  }
  return curve;
}

Pose25DBatch predict(PoseNet& model, const Dataset& data, int64_t batch_size) {
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  std::vector<torch::Tensor> uv, zn;
  for (int64_t start = 0; start < data.size(); start += batch_size) {
    const auto end = std::min(start + batch_size, data.size());
    const auto images = data.images.slice(0, start, end).to(torch::kFloat32) / 255.0f;
    const auto out = model->forward(images);
    uv.push_back(out.pose.uv);
    zn.push_back(out.pose.zn);
  }
  model->train(was_training);
  return {torch::cat(uv), torch::cat(zn)};
}

EvalReport evaluate(PoseNet& model, const Dataset& data, std::span<const double> thresholds,
                    int64_t batch_size) {
  const auto pred = from_batch(predict(model, data, batch_size));
  const auto kp = data.kp3d.accessor<double, 3>();
  const auto rz = data.root_z.accessor<double, 1>();
  const auto bd = data.bone_d.accessor<double, 1>();
  std::vector<Keypoints3D> lifted, gt;
  int64_t invalid = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto n = static_cast<int64_t>(i);
    auto lift = lift_to_3d(pred[i], data.intrinsics, rz[n], bd[n], data.norm);
    if (!lift.valid) ++invalid;
    lifted.push_back(lift.points);
    Keypoints3D g;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      const auto kk = static_cast<int64_t>(k);
      g[k] = Eigen::Vector3d(kp[n][kk][0], kp[n][kk][1], kp[n][kk][2]);
    }
    gt.push_back(g);
  }
  const auto default_t = thresholds_20_50();
  auto report = make_report(epe(lifted, gt), thresholds.empty() ? default_t : thresholds);
  report.invalid_lifts = invalid;
  return report;
}

Eigen::MatrixX2d pca_2d(const Eigen::MatrixXd& features) {
  if (features.rows() < 2 || features.cols() < 2) {
    throw std::invalid_argument("pca_2d: need at least two rows and two feature columns");
  }
  const Eigen::MatrixXd centered = features.rowwise() - features.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(features.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca_2d: eigen solve failed");
  // eigenvalues come back ascending
  const auto d = cov.cols();
  Eigen::MatrixXd axes(d, 2);
  for (int a = 0; a < 2; ++a) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - a);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(a) = v;
  }
  return centered * axes;
}

std::vector<ScatterPoint> project_features(PoseNet& model, const Dataset& source,
                                           const Dataset& target, int64_t n_samples,
                                           std::ostream* warn) {
  if (n_samples < 2) throw std::invalid_argument("project_features: n_samples must be >= 2");
  const int64_t want = n_samples / 2;
  const int64_t ns = std::min(want, source.size());
  const int64_t nt = std::min(n_samples - want, target.size());
  if ((ns < want || nt < n_samples - want) && warn) {
    *warn << "warning: requested " << n_samples << " samples, using " << ns + nt << " ("
          << ns << " source, " << nt << " target)\n";
  }

  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  const auto pooled = [&](const Dataset& data, int64_t count) {
    std::vector<torch::Tensor> parts;
    for (int64_t start = 0; start < count; start += 32) {
      const auto end = std::min(start + 32, count);
      const auto images = data.images.slice(0, start, end).to(torch::kFloat32) / 255.0f;
      parts.push_back(pool_features(model->encode(images, data.domain)));
    }
    return torch::cat(parts).to(torch::kFloat64).contiguous();
  };
  const auto fs = pooled(source, ns);
  const auto ft = pooled(target, nt);
  model->train(was_training);

  const auto all = torch::cat({fs, ft}).contiguous();
  const auto rows = all.size(0), cols = all.size(1);
  Eigen::MatrixXd m(rows, cols);
  const auto a = all.accessor<double, 2>();
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) m(i, j) = a[i][j];
  const auto xy = pca_2d(m);

  std::vector<ScatterPoint> points;
  for (int64_t i = 0; i < rows; ++i) {
    points.push_back({xy(i, 0), xy(i, 1), i < ns ? source.domain : target.domain});
  }
  return points;
}

void write_scatter_csv(std::span<const ScatterPoint> points, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "x,y,domain\n";
  char line[96];
  for (const auto& p : points) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,", p.x, p.y);
    out << line << to_string(p.domain) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace awh
