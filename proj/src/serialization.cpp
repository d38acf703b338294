#include "fairpoison/serialization.hpp"

#include "fairpoison/error.hpp"
#include "json.hpp"

namespace fairpoison {

namespace {

using Json = nlohmann::ordered_json;

Json Parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("model JSON: ") + e.what());
  }
}

const Json& Field(const Json& j, const char* key) {
  if (!j.is_object())
    throw Error(ErrorKind::kParse, "model JSON: expected an object");
  const auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorKind::kParse,
                std::string("model JSON: missing field '") + key + "'");
  }
  return *it;
}

double Number(const Json& j, const char* key) {
  const Json& v = Field(j, key);
  if (!v.is_number()) {
    throw Error(ErrorKind::kParse,
                std::string("model JSON: field '") + key + "' is not a number");
  }
  return v.get<double>();
}

long long Integer(const Json& j, const char* key) {
  const Json& v = Field(j, key);
  if (!v.is_number_integer()) {
    throw Error(ErrorKind::kParse, std::string("model JSON: field '") + key +
                                       "' is not an integer");
  }
  return v.get<long long>();
}

Json VectorJson(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector VectorFrom(const Json& j, const char* key) {
  const Json& v = Field(j, key);
  if (!v.is_array()) {
    throw Error(ErrorKind::kParse,
                std::string("model JSON: field '") + key + "' is not an array");
  }
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw Error(
          ErrorKind::kParse,
          std::string("model JSON: non-numeric entry in '") + key + "'");
    }
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

Json MatrixJson(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out.push_back(VectorJson(m.row(r).transpose()));
  }
  return out;
}

Matrix MatrixFrom(const Json& j, const char* key, Eigen::Index cols) {
  const Json& v = Field(j, key);
  if (!v.is_array()) {
    throw Error(ErrorKind::kParse,
                std::string("model JSON: field '") + key + "' is not an array");
  }
  Matrix out(static_cast<Eigen::Index>(v.size()), cols);
  for (std::size_t r = 0; r < v.size(); ++r) {
    Json row_holder = {{"row", v[r]}};
    const Vector row = VectorFrom(row_holder, "row");
    if (row.size() != cols) {
      throw Error(ErrorKind::kParse,
                  std::string("model JSON: ragged rows in '") + key + "'");
    }
    out.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return out;
}

Json LinearJson(const LinearModel& model) {
  Json j;
  j["loss_kind"] = LossKindName(model.loss);
  j["reg_c"] = model.reg_c;
  j["bias"] = model.bias;
  j["weights"] = VectorJson(model.weights);
  return j;
}

LinearModel LinearFrom(const Json& j) {
  const Json& loss = Field(j, "loss_kind");
  if (!loss.is_string())
    throw Error(ErrorKind::kParse, "model JSON: loss_kind is not a string");
  LinearModel m;
  try {
    m.loss = ParseLossKind(loss.get<std::string>());
  } catch (const Error& e) {
    throw Error(ErrorKind::kParse, std::string("model JSON: ") + e.what());
  }
  m.reg_c = Number(j, "reg_c");
  m.bias = Number(j, "bias");
  m.weights = VectorFrom(j, "weights");
  if (!(m.reg_c > 0.0))
    throw Error(ErrorKind::kParse, "model JSON: reg_c must be positive");
  return m;
}

Json TreeJson(const DecisionTree& tree) {
  Json nodes = Json::array();
  for (const TreeNode& n : tree.nodes) {
    nodes.push_back(Json{{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"label", n.label}});
  }
  return Json{{"nodes", nodes}};
}

DecisionTree TreeFrom(const Json& j) {
  const Json& nodes = Field(j, "nodes");
  if (!nodes.is_array() || nodes.empty()) {
    throw Error(ErrorKind::kParse,
                "model JSON: tree needs a non-empty node array");
  }
  DecisionTree tree;
  const auto count = static_cast<long long>(nodes.size());
  for (const Json& n : nodes) {
    TreeNode node;
    node.feature = static_cast<int>(Integer(n, "feature"));
    node.threshold = Number(n, "threshold");
    node.left = static_cast<int>(Integer(n, "left"));
    node.right = static_cast<int>(Integer(n, "right"));
    node.label = static_cast<int>(Integer(n, "label"));
    if (node.feature >= 0 && (node.left < 0 || node.left >= count ||
                              node.right < 0 || node.right >= count)) {
      throw Error(ErrorKind::kParse,
                  "model JSON: tree child index out of range");
    }
    tree.nodes.push_back(node);
  }
  return tree;
}

Json TargetJson(const TargetModel& model) {
  Json j;
  j["model"] = TargetModelName(model);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GaussianNb>) {
          j["prior_negative"] = m.prior_negative;
          j["prior_positive"] = m.prior_positive;
          j["means"] = MatrixJson(m.means);
          j["variances"] = MatrixJson(m.variances);
        } else if constexpr (std::is_same_v<T, DecisionTree>) {
          j["nodes"] = TreeJson(m)["nodes"];
        } else if constexpr (std::is_same_v<T, RandomForest>) {
          j["seed"] = m.seed;
          Json trees = Json::array();
          for (const DecisionTree& t : m.trees) trees.push_back(TreeJson(t));
          j["trees"] = trees;
        } else {
          j["gamma"] = m.gamma;
          j["reg_c"] = m.reg_c;
          j["bias"] = m.bias;
          j["coefficients"] = VectorJson(m.coefficients);
          j["support_vectors"] = MatrixJson(m.support_vectors);
        }
      },
      model);
  return j;
}

TargetModel TargetFrom(const Json& j) {
  const Json& tag = Field(j, "model");
  if (!tag.is_string())
    throw Error(ErrorKind::kParse, "model JSON: 'model' is not a string");
  const std::string name = tag.get<std::string>();
  if (name == "gaussian_nb") {
    GaussianNb m;
    m.prior_negative = Number(j, "prior_negative");
    m.prior_positive = Number(j, "prior_positive");
    const Json& means = Field(j, "means");
    const Eigen::Index d =
        means.is_array() && !means.empty() && means[0].is_array()
            ? static_cast<Eigen::Index>(means[0].size())
            : 0;
    m.means = MatrixFrom(j, "means", d);
    m.variances = MatrixFrom(j, "variances", d);
    if (m.means.rows() != 2 || m.variances.rows() != 2) {
      throw Error(ErrorKind::kParse,
                  "model JSON: gaussian_nb needs two class rows");
    }
    return m;
  }
  if (name == "decision_tree") return TreeFrom(j);
  if (name == "random_forest") {
    RandomForest m;
    const Json& seed = Field(j, "seed");
    if (!seed.is_number_unsigned()) {
      throw Error(ErrorKind::kParse, "model JSON: forest seed is not unsigned");
    }
    m.seed = seed.get<std::uint64_t>();
    const Json& trees = Field(j, "trees");
    if (!trees.is_array() || trees.empty()) {
      throw Error(ErrorKind::kParse,
                  "model JSON: forest needs a non-empty tree array");
    }
    for (const Json& t : trees) m.trees.push_back(TreeFrom(t));
    return m;
  }
  if (name == "rbf_svm") {
    RbfSvm m;
    m.gamma = Number(j, "gamma");
    m.reg_c = Number(j, "reg_c");
    m.bias = Number(j, "bias");
    m.coefficients = VectorFrom(j, "coefficients");
    const Json& sv = Field(j, "support_vectors");
    const Eigen::Index d = sv.is_array() && !sv.empty() && sv[0].is_array()
                               ? static_cast<Eigen::Index>(sv[0].size())
                               : 0;
    m.support_vectors = MatrixFrom(j, "support_vectors", d);
    if (m.support_vectors.rows() != m.coefficients.size()) {
      throw Error(ErrorKind::kParse,
                  "model JSON: support vector and coefficient counts differ");
    }
    return m;
  }
  throw Error(ErrorKind::kParse, "model JSON: unknown model '" + name + "'");
}

}  // namespace

std::string LinearModelToJson(const LinearModel& model) {
  return LinearJson(model).dump(2);
}

LinearModel LinearModelFromJson(const std::string& text) {
  return LinearFrom(Parse(text));
}

std::string TargetModelToJson(const TargetModel& model) {
  return TargetJson(model).dump(2);
}

TargetModel TargetModelFromJson(const std::string& text) {
  return TargetFrom(Parse(text));
}

AnyModel ModelFromJson(const std::string& text) {
  const Json j = Parse(text);
  if (j.is_object() && j.contains("model")) return TargetFrom(j);
  return LinearFrom(j);
}

std::string ModelToJson(const AnyModel& model) {
  if (const auto* linear = std::get_if<LinearModel>(&model)) {
    return LinearModelToJson(*linear);
  }
  return TargetModelToJson(std::get<TargetModel>(model));
}

std::vector<int> PredictAny(const AnyModel& model, const Matrix& features) {
  if (const auto* linear = std::get_if<LinearModel>(&model)) {
    if (static_cast<std::size_t>(features.cols()) != linear->dim()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "model expects " + std::to_string(linear->dim()) +
                      " features, data has " + std::to_string(features.cols()));
    }
    return Predict(*linear, features);
  }
  return PredictTarget(std::get<TargetModel>(model), features);
}

}  // namespace fairpoison
