#include "twinbeam/config.hpp"

#include <fstream>
#include <sstream>

#include "twinbeam/errors.hpp"
#include "twinbeam/model.hpp"
#include "twinbeam/text.hpp"

namespace twinbeam {

namespace {

[[noreturn]] void cfg_fail(const std::string& where, const std::string& why) {
  throw ConfigurationError(where.empty() ? why : where + ": " + why);
}

double to_double(const std::string& where, std::string_view key, std::string_view v) {
  try {
    return parse_double(v, key);
  } catch (const ParseError&) {
    std::ostringstream os;
    os << "key '" << key << "': cannot parse number from '" << v << "'";
    cfg_fail(where, os.str());
  }
}

std::uint64_t to_u64(const std::string& where, std::string_view key,
                     std::string_view v) {
  try {
    return parse_u64(v, key);
  } catch (const ParseError&) {
    std::ostringstream os;
    os << "key '" << key << "': cannot parse non-negative integer from '" << v << "'";
    cfg_fail(where, os.str());
  }
}

bool to_bool(const std::string& where, std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  std::ostringstream os;
  os << "key '" << key << "': expected a boolean (on/off/true/false/1/0), got '"
     << v << "'";
  cfg_fail(where, os.str());
}

std::vector<double> to_double_list(const std::string& where, std::string_view key,
                                   std::string_view v) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    std::size_t comma = v.find(',', pos);
    if (comma == std::string_view::npos) comma = v.size();
    const std::string_view item = trim(v.substr(pos, comma - pos));
    if (!item.empty()) out.push_back(to_double(where, key, item));
    pos = comma + 1;
  }
  if (out.empty()) {
    std::ostringstream os;
    os << "key '" << key << "': list is empty";
    cfg_fail(where, os.str());
  }
  return out;
}

} // namespace

void validate(const RunConfig& config) {
  try {
    validate(config.source);
    if (config.camera_enabled) {
      validate(config.camera);
      validate(config.geometry);
    }
  } catch (const DomainError& e) {
    throw ConfigurationError(e.what());
  }
  if (config.alpha_list.empty())
    throw ConfigurationError("sample.alpha_list must not be empty");
  for (double a : config.alpha_list)
    if (!(a >= 0.0 && a <= 1.0)) {
      std::ostringstream os;
      os << "sample.alpha_list entry " << a << " outside [0, 1]";
      throw ConfigurationError(os.str());
    }
  if (config.protocol.n_series < 2)
    throw ConfigurationError("protocol.n_series must be >= 2");
  if (config.protocol.frames_per_series < 2)
    throw ConfigurationError("protocol.frames_per_series must be >= 2");
  if (!(config.eta_d > 0.0 && config.eta_d <= 1.0))
    throw ConfigurationError("eta_d must be in (0, 1]");
  if (!(config.eta_d_err >= 0.0))
    throw ConfigurationError("eta_d_err must be >= 0");
  if (config.calibration_frames < 2)
    throw ConfigurationError("calibration.n_frames must be >= 2");
  if (!(config.roi_half_width_sigmas > 0.0))
    throw ConfigurationError("roi.half_width_sigmas must be > 0");
  if (config.baseline_mc_frames < 2)
    throw ConfigurationError("baseline.mc_frames must be >= 2");
  if (!(config.flag_threshold >= 0.0))
    throw ConfigurationError("report.flag_threshold must be >= 0");
  if (config.output_dir.empty())
    throw ConfigurationError("output.dir must not be empty");
}

RunConfig parse_config_text(const std::string& text, const std::string& where) {
  RunConfig cfg;
  bool seen_mu = false, seen_eta1 = false, seen_eta2 = false, seen_seed = false;

  std::istringstream is(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      std::ostringstream os;
      os << "line " << line_no << ": expected 'key = value', got '" << line << "'";
      cfg_fail(where, os.str());
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view val = trim(line.substr(eq + 1));

    if (key == "source.mu") { cfg.source.mu = to_double(where, key, val); seen_mu = true; }
    else if (key == "source.eta1") { cfg.source.eta1 = to_double(where, key, val); seen_eta1 = true; }
    else if (key == "source.eta2") { cfg.source.eta2 = to_double(where, key, val); seen_eta2 = true; }
    else if (key == "source.excess_noise") cfg.source.excess_noise = to_double(where, key, val);
    else if (key == "source.bg1") cfg.source.bg1 = to_double(where, key, val);
    else if (key == "source.bg2") cfg.source.bg2 = to_double(where, key, val);
    else if (key == "sample.alpha_list") cfg.alpha_list = to_double_list(where, key, val);
    else if (key == "camera.enabled") cfg.camera_enabled = to_bool(where, key, val);
    else if (key == "camera.sensitivity") cfg.camera.sensitivity = to_double(where, key, val);
    else if (key == "camera.offset") cfg.camera.offset = to_double(where, key, val);
    else if (key == "camera.read_noise") cfg.camera.read_noise = to_double(where, key, val);
    else if (key == "camera.quantize") cfg.camera.quantize = to_bool(where, key, val);
    else if (key == "geometry.pixels") cfg.geometry.pixels = static_cast<int>(to_u64(where, key, val));
    else if (key == "geometry.center1") cfg.geometry.center1 = to_double(where, key, val);
    else if (key == "geometry.width1") cfg.geometry.width1 = to_double(where, key, val);
    else if (key == "geometry.center2") cfg.geometry.center2 = to_double(where, key, val);
    else if (key == "geometry.width2") cfg.geometry.width2 = to_double(where, key, val);
    else if (key == "geometry.exposure_s") cfg.geometry.exposure_s = to_double(where, key, val);
    else if (key == "protocol.n_series") cfg.protocol.n_series = static_cast<std::size_t>(to_u64(where, key, val));
    else if (key == "protocol.frames_per_series") cfg.protocol.frames_per_series = static_cast<std::size_t>(to_u64(where, key, val));
    else if (key == "eta_d") cfg.eta_d = to_double(where, key, val);
    else if (key == "eta_d_err") cfg.eta_d_err = to_double(where, key, val);
    else if (key == "seed") { cfg.seed = to_u64(where, key, val); seen_seed = true; }
    else if (key == "output.dir") cfg.output_dir = std::string(val);
    else if (key == "calibration.n_frames") cfg.calibration_frames = static_cast<std::size_t>(to_u64(where, key, val));
    else if (key == "roi.half_width_sigmas") cfg.roi_half_width_sigmas = to_double(where, key, val);
    else if (key == "baseline.mc_frames") cfg.baseline_mc_frames = static_cast<std::size_t>(to_u64(where, key, val));
    else if (key == "report.flag_threshold") cfg.flag_threshold = to_double(where, key, val);
    else {
      std::ostringstream os;
      os << "line " << line_no << ": unknown config key '" << key << "'";
      cfg_fail(where, os.str());
    }
  }

  if (!seen_mu) cfg_fail(where, "missing required key 'source.mu'");
  if (!seen_eta1) cfg_fail(where, "missing required key 'source.eta1'");
  if (!seen_eta2) cfg_fail(where, "missing required key 'source.eta2'");
  if (!seen_seed) cfg_fail(where, "missing required key 'seed'");

  try {
    validate(cfg);
  } catch (const ConfigurationError& e) {
    cfg_fail(where, e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigurationError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path);
}

} // namespace twinbeam
