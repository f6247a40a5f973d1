#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semloc/observation_model.hpp"

namespace semloc {

/// `t,phi,phi_valid,inter,inter_valid,rtype,rtype_valid,v,v_valid,od_d,od_th,od_valid`
/// with t in UTC seconds, inter 1 = visible, rtype 1 = highway.
std::string observations_to_csv(std::span<const ObservationFrame> frames);
std::vector<ObservationFrame> observations_from_csv(std::string_view text);

/// `t,class,res_d,res_theta,res_sun,inter_pred,inter_gt,rtype_pred,rtype_gt`; empty fields are missing.
std::vector<ResidualRecord> residuals_from_csv(std::string_view text);
std::string residuals_to_csv(std::span<const ResidualRecord> records);

std::string noise_model_to_json(const NoiseModel& nm);
NoiseModel noise_model_from_json(std::string_view text);

}  // namespace semloc
