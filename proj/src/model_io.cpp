#include "mvmdp/model_io.hpp"

#include <fstream>

#include "mvmdp/error.hpp"

namespace mvmdp {

using nlohmann::json;

namespace {

double number(const json& j, const char* what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    std::size_t used = 0;
    double x = 0;
    try {
      x = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ModelError(std::string("bad decimal string for ") + what + ": " + s);
    return x;
  }
  throw ModelError(std::string("expected number for ") + what);
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ModelError(std::string("missing field \"") + key + "\"");
  return *it;
}

}  // namespace

json model_to_json(const TabularMdp& mdp) {
  const MdpData& d = mdp.data();
  json doc;
  doc["schema"] = kModelSchema;
  doc["horizon"] = d.horizon;
  doc["num_states"] = d.num_states;
  doc["num_actions"] = d.num_actions;
  doc["lambda"] = d.lambda;
  doc["admissible"] = d.admissible;
  json stages = json::array();
  for (const Stage& st : d.stages) {
    json js;
    if (const auto* k = std::get_if<KernelStage>(&st)) {
      json rows = json::array();
      for (const auto& row : k->rows) {
        json jr = json::array();
        for (const auto& e : row) jr.push_back(json::array({e.next, e.prob}));
        rows.push_back(std::move(jr));
      }
      json rew = json::array();
      for (int s = 0; s < d.num_states; ++s) {
        json rs = json::array();
        for (std::size_t kk = 0; kk < d.admissible[s].size(); ++kk)
          rs.push_back(k->reward[mdp.pair(s, static_cast<int>(kk))]);
        rew.push_back(std::move(rs));
      }
      js["kernel"] = std::move(rows);
      js["reward"] = std::move(rew);
    } else {
      const auto& n = std::get<NoiseStage>(st);
      js["num_post"] = n.num_post;
      js["post"] = n.post;
      js["decision_reward"] = n.decision_reward;
      json atoms = json::array();
      for (const auto& at : n.atoms) atoms.push_back({{"p", at.prob}, {"next", at.next}, {"reward", at.reward}});
      js["atoms"] = std::move(atoms);
    }
    stages.push_back(std::move(js));
  }
  doc["stages"] = std::move(stages);
  json meta;
  meta["name"] = d.meta.name;
  meta["linear_convex"] = d.meta.linear_convex;
  if (!d.meta.state_values.empty()) meta["state_values"] = d.meta.state_values;
  doc["metadata"] = std::move(meta);
  return doc;
}

TabularMdp model_from_json(const json& doc) {
  try {
    if (!doc.is_object()) throw ModelError("model document is not an object");
    if (auto it = doc.find("schema"); it != doc.end() && *it != kModelSchema)
      throw ModelError("unsupported schema " + it->dump());
    MdpData d;
    d.horizon = field(doc, "horizon").get<int>();
    d.num_states = field(doc, "num_states").get<int>();
    d.num_actions = field(doc, "num_actions").get<int>();
    d.lambda = number(field(doc, "lambda"), "lambda");
    d.admissible = field(doc, "admissible").get<std::vector<std::vector<int>>>();
    if (static_cast<int>(d.admissible.size()) != d.num_states) throw ModelError("admissible table size mismatch");
    std::size_t pairs = 0;
    for (const auto& a : d.admissible) pairs += a.size();
    for (const json& js : field(doc, "stages")) {
      if (js.contains("atoms")) {
        NoiseStage n;
        n.num_post = field(js, "num_post").get<int>();
        n.post = field(js, "post").get<std::vector<int>>();
        for (const json& c : field(js, "decision_reward")) n.decision_reward.push_back(number(c, "decision_reward"));
        for (const json& ja : js["atoms"]) {
          NoiseAtom at;
          at.prob = number(field(ja, "p"), "atom probability");
          at.next = field(ja, "next").get<std::vector<int>>();
          for (const json& r : field(ja, "reward")) at.reward.push_back(number(r, "atom reward"));
          n.atoms.push_back(std::move(at));
        }
        if (n.post.size() != pairs || n.decision_reward.size() != pairs) throw ModelError("post map size mismatch");
        d.stages.emplace_back(std::move(n));
      } else {
        KernelStage k;
        for (const json& jr : field(js, "kernel")) {
          std::vector<KernelEntry> row;
          for (const json& e : jr) {
            if (!e.is_array() || e.size() != 2) throw ModelError("kernel entry must be [next, p]");
            row.push_back({e[0].get<int>(), number(e[1], "kernel probability")});
          }
          k.rows.push_back(std::move(row));
        }
        const json& rew = field(js, "reward");
        if (static_cast<int>(rew.size()) != d.num_states) throw ModelError("reward table size mismatch");
        for (int s = 0; s < d.num_states; ++s) {
          if (rew[s].size() != d.admissible[s].size()) throw ModelError("reward row size mismatch");
          for (const json& r : rew[s]) k.reward.push_back(number(r, "reward"));
        }
        if (k.rows.size() != pairs) throw ModelError("kernel has wrong number of rows");
        d.stages.emplace_back(std::move(k));
      }
    }
    if (auto it = doc.find("metadata"); it != doc.end()) {
      d.meta.name = it->value("name", std::string());
      d.meta.linear_convex = it->value("linear_convex", false);
      if (it->contains("state_values")) d.meta.state_values = (*it)["state_values"].get<std::vector<double>>();
    }
    return TabularMdp(std::move(d));
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const TabularMdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << model_to_json(mdp).dump() << '\n';
}

TabularMdp load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ModelError(path + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace mvmdp
