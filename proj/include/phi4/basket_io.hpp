#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "snapshot.hpp"
#include "stochastic.hpp"

namespace phi4 {

// Basket snapshot: one field file per object and slice plus basket.json listing
// object names, times, a, b, b~ and the basket norm.
namespace detail {

inline std::vector<std::pair<const char*, Trajectory StochasticBasket::*>> basket_members() {
  return {{"X", &StochasticBasket::X},       {"X2", &StochasticBasket::X2},   {"X21", &StochasticBasket::X21},
          {"X31", &StochasticBasket::X31},   {"X32", &StochasticBasket::X32}, {"X23", &StochasticBasket::X23},
          {"X23t", &StochasticBasket::X23t}, {"X33", &StochasticBasket::X33}};
}

}  // namespace detail

inline void write_basket(const std::filesystem::path& dir, const StochasticBasket& B, const BasketNormReport& norm) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["a"] = B.a;
  j["b"] = B.b;
  j["btilde"] = B.btilde;
  j["basket_norm"] = norm.value;
  j["basket_norm_entries"] = norm.entries;
  j["times"] = B.X.times;
  j["objects"] = nlohmann::json::array();
  char name[64];
  for (auto [key, member] : detail::basket_members()) {
    const Trajectory& tr = B.*member;
    require(tr.times == B.X.times, std::string("write_basket: ") + key + " is not on the X time grid");
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t n = 0; n < tr.size(); ++n) {
      std::snprintf(name, sizeof name, "%s_%05zu.phi", key, n);
      write_field(dir / name, tr.slices[n]);
      files.push_back(name);
    }
    j["objects"].push_back({{"name", key}, {"files", files}});
  }
  std::ofstream(dir / "basket.json") << j.dump(2) << "\n";
}

inline StochasticBasket read_basket(const std::filesystem::path& dir, double* norm = nullptr) {
  std::ifstream in(dir / "basket.json");
  if (!in) throw ConstraintError("read_basket: no basket.json in " + dir.string());
  nlohmann::json j = nlohmann::json::parse(in);
  StochasticBasket B;
  B.a = j["a"];
  B.b = j["b"];
  B.btilde = j["btilde"].get<std::vector<double>>();
  auto times = j["times"].get<std::vector<double>>();
  for (auto [key, member] : detail::basket_members()) {
    const nlohmann::json* obj = nullptr;
    for (const auto& o : j["objects"])
      if (o["name"] == key) obj = &o;
    if (!obj) throw ConstraintError(std::string("read_basket: missing object ") + key);
    const auto& files = (*obj)["files"];
    if (files.size() != times.size()) throw MismatchError(std::string("read_basket: slice count of ") + key);
    Trajectory tr;
    for (std::size_t n = 0; n < times.size(); ++n) tr.push(times[n], read_field(dir / files[n].get<std::string>()));
    B.*member = std::move(tr);
  }
  if (norm) *norm = j["basket_norm"];
  return B;
}

}  // namespace phi4
