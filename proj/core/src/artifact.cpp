#include "hagg/artifact.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "hagg/error.hpp"
#include "hagg/simplex.hpp"

namespace hagg {

using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "hagg-model/1";

void mismatch(const std::string& message) { fail(Errc::artifact_mismatch, message); }

ojson c_box_json(double c) {
  if (std::isinf(c)) return "inf";
  return c;
}

double c_box_value(const ojson& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    fail(Errc::parse, "c_box must be a number or \"inf\"");
  }
  return v.get<double>();
}

}  // namespace

void validate(const ModelArtifact& artifact) {
  const Hierarchy hierarchy(artifact.config.depth);
  if (artifact.beta.size() != hierarchy.node_count()) {
    mismatch("artifact has " + std::to_string(artifact.beta.size()) + " weights for depth " +
             std::to_string(artifact.config.depth));
  }
  if (!on_simplex(artifact.beta)) mismatch("artifact weights are not on the simplex");
  validate(artifact.config.kernel);
  const auto& model = artifact.model;
  const std::size_t n = model.training_ids.size();
  if (model.training_labels.size() != n) mismatch("training ids and labels differ in count");
  for (std::size_t c = 0; c < model.machines.size(); ++c) {
    if (model.machines[c].class_id != static_cast<int>(c) + 1) mismatch("machines are not ordered by class");
    if (model.machines[c].alpha.size() != n) mismatch("machine dual vector does not span the training set");
  }
}

std::string serialize_artifact(const ModelArtifact& artifact) {
  validate(artifact);
  const auto& cfg = artifact.config;
  const Hierarchy hierarchy(cfg.depth);

  ojson config;
  config["depth"] = cfg.depth;
  config["variant"] = std::string(to_string(cfg.variant));
  config["kernel"] = std::string(to_string(cfg.kernel.kind));
  config["gamma"] = cfg.kernel.gamma;
  config["normalization"] = std::string(to_string(cfg.norm));
  config["stream"] = std::string(to_string(cfg.stream));
  config["route"] = cfg.route;
  config["c_box"] = c_box_json(cfg.svm.c_box);
  config["kkt_tol"] = cfg.svm.kkt_tol;
  config["max_passes"] = cfg.svm.max_passes;

  ojson training = ojson::object();
  for (const auto& [key, value] : cfg.training) training[key] = value;

  ojson beta = ojson::object();
  for (std::size_t p = 0; p < artifact.beta.size(); ++p) beta[node_key(hierarchy.node(p))] = artifact.beta[p];

  const auto& model = artifact.model;
  ojson machines = ojson::array();
  for (const auto& machine : model.machines) {
    ojson support = ojson::array();
    for (std::size_t i = 0; i < machine.alpha.size(); ++i) {
      if (machine.alpha[i] == 0.0) continue;
      support.push_back(ojson{{"video_id", model.training_ids[i]},
                              {"alpha", machine.alpha[i]},
                              {"y", model.y(machine.class_id, i)}});
    }
    machines.push_back(ojson{{"class", machine.class_id},
                             {"b", machine.b},
                             {"objective", machine.objective},
                             {"iterations", machine.iterations},
                             {"support", std::move(support)}});
  }

  ojson doc;
  doc["format"] = kFormat;
  doc["config"] = std::move(config);
  doc["training"] = std::move(training);
  doc["beta"] = std::move(beta);
  doc["training_ids"] = model.training_ids;
  doc["training_labels"] = model.training_labels;
  doc["machines"] = std::move(machines);
  return doc.dump(2) + "\n";
}

ModelArtifact parse_artifact(const std::string& text) {
  ModelArtifact out;
  try {
    const ojson doc = ojson::parse(text);
    if (doc.value("format", std::string{}) != kFormat) fail(Errc::parse, "not a model artifact");
    const ojson& config = doc.at("config");
    auto& cfg = out.config;
    cfg.depth = config.at("depth").get<int>();
    cfg.variant = parse_variant(config.at("variant").get<std::string>());
    cfg.kernel.kind = parse_kernel_kind(config.at("kernel").get<std::string>());
    cfg.kernel.gamma = config.at("gamma").get<double>();
    cfg.norm = parse_feature_norm(config.at("normalization").get<std::string>());
    cfg.stream = parse_stream(config.at("stream").get<std::string>());
    cfg.route = config.at("route").get<std::string>();
    cfg.svm.c_box = c_box_value(config.at("c_box"));
    cfg.svm.kkt_tol = config.at("kkt_tol").get<double>();
    cfg.svm.max_passes = config.at("max_passes").get<int>();
    if (doc.contains("training")) {
      for (const auto& [key, value] : doc.at("training").items()) cfg.training[key] = value.get<std::string>();
    }

    const Hierarchy hierarchy(cfg.depth);
    const ojson& beta = doc.at("beta");
    out.beta.resize(hierarchy.node_count());
    if (beta.size() != out.beta.size()) mismatch("weight table does not match the depth");
    for (std::size_t p = 0; p < out.beta.size(); ++p) {
      const std::string key = node_key(hierarchy.node(p));
      if (!beta.contains(key)) mismatch("weight for node " + key + " is missing");
      out.beta[p] = beta.at(key).get<double>();
    }

    auto& model = out.model;
    model.training_ids = doc.at("training_ids").get<std::vector<std::string>>();
    model.training_labels = doc.at("training_labels").get<std::vector<int>>();
    if (model.training_ids.size() != model.training_labels.size()) mismatch("training ids and labels differ in count");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < model.training_ids.size(); ++i) {
      if (!index.emplace(model.training_ids[i], i).second) {
        fail(Errc::duplicate_id, "training id '" + model.training_ids[i] + "' repeats");
      }
    }
    for (const auto& m : doc.at("machines")) {
      BinaryMachine machine;
      machine.class_id = m.at("class").get<int>();
      machine.b = m.at("b").get<double>();
      machine.objective = m.value("objective", 0.0);
      machine.iterations = m.value("iterations", std::size_t{0});
      machine.alpha.assign(model.training_ids.size(), 0.0);
      for (const auto& s : m.at("support")) {
        const auto id = s.at("video_id").get<std::string>();
        const auto it = index.find(id);
        if (it == index.end()) mismatch("support video '" + id + "' is not a training video");
        if (s.at("y").get<int>() != model.y(machine.class_id, it->second)) {
          mismatch("support label of '" + id + "' disagrees with the training labels");
        }
        machine.alpha[it->second] = s.at("alpha").get<double>();
      }
      model.machines.push_back(std::move(machine));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, std::string("malformed model artifact: ") + e.what());
  }
  validate(out);
  return out;
}

void write_artifact(const ModelArtifact& artifact, const std::filesystem::path& path) {
  const std::string text = serialize_artifact(artifact);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail(Errc::io, "cannot create " + path.string());
  file << text;
  if (!file) fail(Errc::io, "write failed for " + path.string());
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail(Errc::io, "cannot open " + path.string());
  std::ostringstream text;
  text << file.rdbuf();
  return parse_artifact(text.str());
}

}  // namespace hagg
