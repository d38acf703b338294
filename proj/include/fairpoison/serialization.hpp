#pragma once

#include <string>
#include <variant>

#include "fairpoison/linear_model.hpp"
#include "fairpoison/target_models.hpp"

namespace fairpoison {

/// {"loss_kind", "reg_c", "bias", "weights"}. Doubles are written in
/// shortest round-trip form, so parse(dump(m)) == m bit for bit.
std::string LinearModelToJson(const LinearModel& model);
LinearModel LinearModelFromJson(const std::string& text);

/// Target models carry a "model" tag: gaussian_nb, decision_tree,
/// random_forest or rbf_svm.
std::string TargetModelToJson(const TargetModel& model);
TargetModel TargetModelFromJson(const std::string& text);

using AnyModel = std::variant<LinearModel, TargetModel>;

/// Dispatches on the presence of the "model" tag.
AnyModel ModelFromJson(const std::string& text);
std::string ModelToJson(const AnyModel& model);

std::vector<int> PredictAny(const AnyModel& model, const Matrix& features);

}  // namespace fairpoison
