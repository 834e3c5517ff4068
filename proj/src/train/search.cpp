#include "rf/train/search.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "rf/binary.hpp"
#include "rf/train/evaluate.hpp"

namespace rf::train {
namespace {

std::vector<std::size_t> radices(const SearchSpace& s) {
  return {s.width.size(), s.L.size(),      s.l_max.size(),   s.fusion.size(),
          s.norm.size(),  s.jitter.size(), s.spec_dim.size()};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  io::write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

std::size_t SearchSpace::size() const {
  std::size_t n = 1;
  for (std::size_t r : radices(*this)) {
    if (r == 0) throw Error(Errc::EmptySpace, "search space has an empty axis");
    n *= r;
  }
  return n;
}

std::pair<nn::ModelConfig, bool> SearchSpace::at(std::size_t index, const nn::ModelConfig& base) const {
  const auto r = radices(*this);
  std::array<std::size_t, 7> digit{};
  for (std::size_t a = r.size(); a-- > 0;) {
    digit[a] = index % r[a];
    index /= r[a];
  }
  nn::ModelConfig c = base;
  c.width = width[digit[0]];
  c.L = L[digit[1]];
  c.l_max = l_max[digit[2]];
  c.fusion = fusion[digit[3]];
  c.norm = norm[digit[4]];
  c.spec_dim = spec_dim[digit[6]];
  return {c, jitter[digit[5]]};
}

nlohmann::json to_json(const SearchSpace& s) {
  nlohmann::json fusion = nlohmann::json::array(), norm = nlohmann::json::array();
  for (auto f : s.fusion) fusion.push_back(nn::to_string(f));
  for (const auto& n : s.norm) norm.push_back(n.name());
  return {{"width", s.width}, {"L", s.L},           {"l_max", s.l_max},      {"fusion", fusion},
          {"normalizer", norm}, {"jitter", s.jitter}, {"spec_dim", s.spec_dim}};
}

SearchSpace search_space_from_json(const nlohmann::json& j) {
  SearchSpace s;
  try {
    if (j.contains("width")) s.width = j.at("width").get<std::vector<int>>();
    if (j.contains("L")) s.L = j.at("L").get<std::vector<int>>();
    if (j.contains("l_max")) s.l_max = j.at("l_max").get<std::vector<int>>();
    if (j.contains("fusion")) {
      s.fusion.clear();
      for (const auto& f : j.at("fusion")) s.fusion.push_back(nn::parse_fusion(f.get<std::string>()));
    }
    if (j.contains("normalizer")) {
      s.norm.clear();
      for (const auto& n : j.at("normalizer")) s.norm.push_back(NormSpec::parse(n.get<std::string>()));
    }
    if (j.contains("jitter")) s.jitter = j.at("jitter").get<std::vector<bool>>();
    if (j.contains("spec_dim")) s.spec_dim = j.at("spec_dim").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("search space: ") + e.what());
  }
  s.size();
  return s;
}

SearchMode parse_search_mode(const std::string& name) {
  if (name == "grid") return SearchMode::Grid;
  if (name == "random") return SearchMode::Random;
  throw Error(Errc::InvalidConfig, "unknown search mode '" + name + "'");
}

nlohmann::json to_json(const Trial& t) {
  return {{"index", t.index},       {"model", nn::to_json(t.model)}, {"jitter", t.jitter},
          {"val_loss", t.val_loss}, {"epochs", t.epochs},            {"test", eval::to_json(t.test)}};
}

std::vector<std::size_t> plan_trials(const SearchSpace& space, const SearchOptions& opts) {
  if (opts.budget < 1) throw Error(Errc::InvalidConfig, "budget must be >= 1");
  const std::size_t n = space.size();
  const std::size_t count = std::min(opts.budget, n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (opts.mode == SearchMode::Random) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(all.begin(), all.end(), rng);
  }
  all.resize(count);
  return all;
}

std::vector<Trial> hyper_search(const SearchSpace& space, const nn::ModelConfig& base, const TrainConfig& cfg,
                                std::span<const RadiationField> train_fields, std::span<const RadiationField> val_fields,
                                std::span<const RadiationField> test_fields, const SearchOptions& opts) {
  const auto plan = plan_trials(space, opts);
  TrainConfig tc = cfg;
  tc.max_epochs = opts.trial_epochs;
  tc.patience = std::min(tc.patience, std::max(1, opts.trial_epochs - 1));

  std::map<std::string, std::pair<std::vector<FieldSample>, std::vector<FieldSample>>> samples;
  auto prepared = [&](const NormSpec& norm) -> const auto& {
    auto it = samples.find(norm.name());
    if (it == samples.end()) {
      std::vector<FieldSample> tr, va;
      for (const auto& f : train_fields) tr.push_back(make_sample(f, norm));
      for (const auto& f : val_fields) va.push_back(make_sample(f, norm));
      it = samples.emplace(norm.name(), std::pair{std::move(tr), std::move(va)}).first;
    }
    return it->second;
  };

  std::vector<Trial> trials;
  for (std::size_t idx : plan) {
    Trial t;
    t.index = idx;
    std::tie(t.model, t.jitter) = space.at(idx, base);
    tc.jitter = t.jitter;
    nn::Model model(t.model, opts.seed + idx);
    const auto& [tr, va] = prepared(t.model.norm);
    const TrainResult r = train(model, tr, va, tc);
    t.val_loss = r.best_val_loss;
    t.epochs = static_cast<int>(r.history.size());
    t.test = evaluate(model, test_fields);
    if (opts.on_trial) opts.on_trial(t);
    trials.push_back(std::move(t));
  }
  std::stable_sort(trials.begin(), trials.end(),
                   [](const Trial& a, const Trial& b) { return a.val_loss < b.val_loss; });

  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : trials) arr.push_back(to_json(t));
    write_json(opts.out_dir / "trials.json", arr);
    nlohmann::json best = {{"model", nn::to_json(trials.front().model)}, {"jitter", trials.front().jitter}};
    write_json(opts.out_dir / "best_config.json", best);
  }
  return trials;
}

}  // namespace rf::train
