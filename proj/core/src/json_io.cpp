// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "json_io.hpp"

namespace pdo::detail {

json grid_to_json(const Grid& g) {
  return json{{"n_space", g.n_space()}, {"n_time", g.n_time()}, {"x_min", g.x_min()},
              {"x_max", g.x_max()},     {"t_min", g.t_min()},   {"t_max", g.t_max()},
              {"dx", g.dx()},           {"dt", g.dt()}};
}

Grid grid_from_json(const json& j, const std::string& context) {
  const std::string ctx = context + ".grid";
  return Grid(require_as<int>(j, "n_space", ctx), require_as<int>(j, "n_time", ctx),
              require_as<double>(j, "x_min", ctx), require_as<double>(j, "x_max", ctx),
              require_as<double>(j, "t_min", ctx), require_as<double>(j, "t_max", ctx));
}

json stats_to_json(const NormStats& s) {
  return json{{"channels", s.channels}, {"mean", s.mean}, {"std", s.std}};
}

NormStats stats_from_json(const json& j, const std::string& context) {
  const std::string ctx = context + ".norm_stats";
  NormStats s;
  s.channels = require_as<std::vector<std::string>>(j, "channels", ctx);
  s.mean = require_as<std::vector<double>>(j, "mean", ctx);
  s.std = require_as<std::vector<double>>(j, "std", ctx);
  s.validate();
  return s;
}

json parse_json_text(const std::string& text, const std::string& context) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(context + ": malformed JSON (" + e.what() + ")");
  }
}

}  // namespace pdo::detail
