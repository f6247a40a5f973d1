#include "semloc/observation_io.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "semloc/csv.hpp"
#include "semloc/errors.hpp"

namespace semloc {

namespace {

bool flag(const CsvTable& table, std::size_t row, std::size_t col) {
  const auto v = table.number(row, col);
  return v && *v != 0.0;
}

std::optional<bool> binary_label(std::string_view text, std::string_view positive,
                                 std::string_view negative) {
  if (text.empty() || text == "nan" || text == "NA") return std::nullopt;
  if (text == "1" || text == positive) return true;
  if (text == "0" || text == negative) return false;
  throw FormatError("unexpected label '" + std::string(text) + "'");
}

std::string opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }
std::string opt(const std::optional<bool>& v) { return v ? (*v ? "1" : "0") : std::string(); }
std::string opt(const std::optional<RoadType>& v) {
  return v ? (*v == RoadType::highway ? "1" : "0") : std::string();
}

}  // namespace

std::string observations_to_csv(std::span<const ObservationFrame> frames) {
  std::string out = "t,phi,phi_valid,inter,inter_valid,rtype,rtype_valid,v,v_valid,od_d,od_th,od_valid\n";
  for (const auto& f : frames) {
    const bool inter_visible = f.intersection == IntersectionObs::visible;
    const bool highway = f.road_type == RoadType::highway;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", f.t, f.phi.value_or(0.0), f.phi ? 1 : 0,
                       inter_visible ? 1 : 0, f.intersection ? 1 : 0, highway ? 1 : 0,
                       f.road_type ? 1 : 0, f.velocity.value_or(0.0), f.velocity ? 1 : 0,
                       f.odometry ? f.odometry->forward : 0.0,
                       f.odometry ? f.odometry->heading_change : 0.0, f.odometry ? 1 : 0);
  }
  return out;
}

std::vector<ObservationFrame> observations_from_csv(std::string_view text) {
  const CsvTable table = CsvTable::parse(text);
  const auto c_t = table.column("t");
  const auto c_phi = table.column("phi"), c_phi_ok = table.column("phi_valid");
  const auto c_inter = table.column("inter"), c_inter_ok = table.column("inter_valid");
  const auto c_rtype = table.column("rtype"), c_rtype_ok = table.column("rtype_valid");
  const auto c_v = table.column("v"), c_v_ok = table.column("v_valid");
  const auto c_od = table.column("od_d"), c_th = table.column("od_th"), c_od_ok = table.column("od_valid");

  std::vector<ObservationFrame> frames;
  frames.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    ObservationFrame f;
    f.t = table.required_number(r, c_t);
    if (flag(table, r, c_phi_ok)) f.phi = table.required_number(r, c_phi);
    if (flag(table, r, c_inter_ok)) {
      const bool visible = *binary_label(table.field(r, c_inter), "visible", "not_visible");
      f.intersection = visible ? IntersectionObs::visible : IntersectionObs::not_visible;
    }
    if (flag(table, r, c_rtype_ok)) {
      const bool highway = *binary_label(table.field(r, c_rtype), "highway", "non_highway");
      f.road_type = highway ? RoadType::highway : RoadType::non_highway;
    }
    if (flag(table, r, c_v_ok)) f.velocity = table.required_number(r, c_v);
    if (flag(table, r, c_od_ok))
      f.odometry = Odometry{table.required_number(r, c_od), table.required_number(r, c_th)};
    frames.push_back(f);
  }
  return frames;
}

std::vector<ResidualRecord> residuals_from_csv(std::string_view text) {
  const CsvTable table = CsvTable::parse(text);
  const auto c_t = table.column("t"), c_class = table.column("class");
  const auto c_d = table.column("res_d"), c_th = table.column("res_theta"), c_sun = table.column("res_sun");
  const auto c_ip = table.column("inter_pred"), c_ig = table.column("inter_gt");
  const auto c_rp = table.column("rtype_pred"), c_rg = table.column("rtype_gt");

  auto road = [&](std::size_t r, std::size_t c) -> std::optional<RoadType> {
    const auto b = binary_label(table.field(r, c), "highway", "non_highway");
    if (!b) return std::nullopt;
    return *b ? RoadType::highway : RoadType::non_highway;
  };

  std::vector<ResidualRecord> records;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    ResidualRecord rec;
    rec.t = table.number(r, c_t).value_or(0.0);
    const std::string_view cls = table.field(r, c_class);
    if (cls == "highway" || cls == "1") {
      rec.road_class = RoadType::highway;
    } else if (cls == "city" || cls == "non_highway" || cls == "0") {
      rec.road_class = RoadType::non_highway;
    } else {
      throw FormatError("unknown residual class '" + std::string(cls) + "'");
    }
    rec.res_d = table.number(r, c_d);
    rec.res_theta = table.number(r, c_th);
    rec.res_sun = table.number(r, c_sun);
    rec.inter_pred = binary_label(table.field(r, c_ip), "visible", "not_visible");
    rec.inter_gt = binary_label(table.field(r, c_ig), "visible", "not_visible");
    rec.rtype_pred = road(r, c_rp);
    rec.rtype_gt = road(r, c_rg);
    records.push_back(rec);
  }
  return records;
}

std::string residuals_to_csv(std::span<const ResidualRecord> records) {
  std::string out = "t,class,res_d,res_theta,res_sun,inter_pred,inter_gt,rtype_pred,rtype_gt\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.t,
                       r.road_class == RoadType::highway ? "highway" : "city", opt(r.res_d),
                       opt(r.res_theta), opt(r.res_sun), opt(r.inter_pred), opt(r.inter_gt),
                       opt(r.rtype_pred), opt(r.rtype_gt));
  }
  return out;
}

std::string noise_model_to_json(const NoiseModel& nm) {
  auto matrix = [](const Eigen::Matrix2d& m) {
    return nlohmann::json::array({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}});
  };
  nlohmann::json j{
      {"sigma_sun", nm.sun_variance},
      {"sigma_odom_highway", matrix(nm.odometry_highway)},
      {"sigma_odom_city", matrix(nm.odometry_city)},
      {"gamma_inter", nm.gamma_inter},
      {"beta_rtype", nm.beta_rtype},
      {"v0", nm.v0},
      {"eps_speed", nm.eps_speed},
  };
  return j.dump(2);
}

NoiseModel noise_model_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text.begin(), text.end());
    auto matrix = [](const nlohmann::json& m) {
      Eigen::Matrix2d out;
      out << m.at(0).at(0).get<double>(), m.at(0).at(1).get<double>(), m.at(1).at(0).get<double>(),
          m.at(1).at(1).get<double>();
      return out;
    };
    NoiseModel nm = NoiseModel::defaults();
    nm.sun_variance = j.value("sigma_sun", nm.sun_variance);
    if (j.contains("sigma_odom_highway")) nm.odometry_highway = matrix(j.at("sigma_odom_highway"));
    if (j.contains("sigma_odom_city")) nm.odometry_city = matrix(j.at("sigma_odom_city"));
    nm.gamma_inter = j.value("gamma_inter", nm.gamma_inter);
    nm.beta_rtype = j.value("beta_rtype", nm.beta_rtype);
    nm.v0 = j.value("v0", nm.v0);
    nm.eps_speed = j.value("eps_speed", nm.eps_speed);
    nm.validate();
    return nm;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("noise model JSON: ") + e.what());
  }
}

}  // namespace semloc
