#include "rar/config.hpp"

#include <fstream>
#include <sstream>

#include "rar/common.hpp"
#include "rar/simhash.hpp"

namespace rar {

std::string to_string(Ablation v) {
  switch (v) {
    case Ablation::kFull: return "full";
    case Ablation::kUser: return "user";
    case Ablation::kSelect: return "select";
    case Ablation::kAuxWght: return "aux_wght";
    case Ablation::kWght: return "wght";
  }
  return "full";
}

std::string to_string(HashVariant v) {
  return v == HashVariant::kStandard ? "standard" : "literal";
}

std::string to_string(Backend v) { return v == Backend::kExact ? "exact" : "simhash"; }

std::string to_string(HeadKind v) { return v == HeadKind::kLogistic ? "logistic" : "mlp"; }

std::string to_string(OptimizerKind v) { return v == OptimizerKind::kSgd ? "sgd" : "adam"; }

std::string to_string(ExposureLabelMode v) {
  return v == ExposureLabelMode::kEntrywise ? "entrywise" : "aggregate";
}

namespace {

[[noreturn]] void bad_enum(const std::string& what, const std::string& s) {
  throw ValidationError("unknown " + what + " value: '" + s + "'");
}

}  // namespace

Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::kFull;
  if (s == "user") return Ablation::kUser;
  if (s == "select") return Ablation::kSelect;
  if (s == "aux_wght") return Ablation::kAuxWght;
  if (s == "wght") return Ablation::kWght;
  bad_enum("ablation", s);
}

HashVariant parse_hash_variant(const std::string& s) {
  if (s == "standard") return HashVariant::kStandard;
  if (s == "literal") return HashVariant::kLiteral;
  bad_enum("hash_variant", s);
}

Backend parse_backend(const std::string& s) {
  if (s == "exact") return Backend::kExact;
  if (s == "simhash") return Backend::kSimhash;
  bad_enum("backend", s);
}

HeadKind parse_head(const std::string& s) {
  if (s == "logistic") return HeadKind::kLogistic;
  if (s == "mlp") return HeadKind::kMlp;
  bad_enum("head", s);
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  bad_enum("optimizer", s);
}

ExposureLabelMode parse_exposure_labels(const std::string& s) {
  if (s == "entrywise") return ExposureLabelMode::kEntrywise;
  if (s == "aggregate") return ExposureLabelMode::kAggregate;
  bad_enum("exposure_labels", s);
}

void Config::validate() const {
  if (d1 <= 0) throw ValidationError("d1 must be positive");
  if (d2 != 0 && d2 != d1)
    throw ValidationError("d2 must equal d1 (embedding store has a single width)");
  if (m_bits <= 0 || m_bits % kFingerprintWordBits != 0)
    throw ValidationError("m_bits must be a positive multiple of " +
                          std::to_string(kFingerprintWordBits));
  if (k_l <= 0 || k_l > l) throw ValidationError("require 0 < k_l <= l");
  if (k_r <= 0 || k_r > r) throw ValidationError("require 0 < k_r <= r");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in [0,1]");
  for (int h : mlp_hidden) {
    if (h <= 0) throw ValidationError("mlp_hidden widths must be positive");
  }
  if (lr < 0.0) throw ValidationError("lr must be non-negative");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (init_scale <= 0.0) throw ValidationError("init_scale must be positive");
}

namespace {

std::string ints_to_csv(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> csv_to_ints(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(std::stoi(tok));
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string Config::to_kv() const {
  std::ostringstream os;
  os << "d1=" << d1 << '\n'
     << "d2=" << d2 << '\n'
     << "m_bits=" << m_bits << '\n'
     << "k_l=" << k_l << '\n'
     << "k_r=" << k_r << '\n'
     << "l=" << l << '\n'
     << "r=" << r << '\n'
     << "alpha=" << fmt_double(alpha) << '\n'
     << "mlp_hidden=" << ints_to_csv(mlp_hidden) << '\n'
     << "lr=" << fmt_double(lr) << '\n'
     << "epochs=" << epochs << '\n'
     << "batch_size=" << batch_size << '\n'
     << "seed=" << seed << '\n'
     << "ablation=" << to_string(ablation) << '\n'
     << "hash_variant=" << to_string(hash_variant) << '\n'
     << "backend=" << to_string(backend) << '\n'
     << "head=" << to_string(head) << '\n'
     << "optimizer=" << to_string(optimizer) << '\n'
     << "exposure_labels=" << to_string(exposure_labels) << '\n'
     << "use_rar=" << (use_rar ? 1 : 0) << '\n'
     << "share_towers=" << (share_towers ? 1 : 0) << '\n'
     << "init_scale=" << fmt_double(init_scale) << '\n';
  return os.str();
}

void Config::apply_kv(const std::string& key, const std::string& value) {
  try {
    if (key == "d1") d1 = std::stoi(value);
    else if (key == "d2") d2 = std::stoi(value);
    else if (key == "m_bits") m_bits = std::stoi(value);
    else if (key == "k_l") k_l = std::stoi(value);
    else if (key == "k_r") k_r = std::stoi(value);
    else if (key == "l") l = std::stoi(value);
    else if (key == "r") r = std::stoi(value);
    else if (key == "alpha") alpha = std::stod(value);
    else if (key == "mlp_hidden") mlp_hidden = csv_to_ints(value);
    else if (key == "lr") lr = std::stod(value);
    else if (key == "epochs") epochs = std::stoi(value);
    else if (key == "batch_size") batch_size = std::stoi(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "ablation") ablation = parse_ablation(value);
    else if (key == "hash_variant") hash_variant = parse_hash_variant(value);
    else if (key == "backend") backend = parse_backend(value);
    else if (key == "head") head = parse_head(value);
    else if (key == "optimizer") optimizer = parse_optimizer(value);
    else if (key == "exposure_labels") exposure_labels = parse_exposure_labels(value);
    else if (key == "use_rar") use_rar = std::stoi(value) != 0;
    else if (key == "share_towers") share_towers = std::stoi(value) != 0;
    else if (key == "init_scale") init_scale = std::stod(value);
    else throw ValidationError("unknown config key: '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw ValidationError("bad value for config key '" + key + "': '" + value + "'");
  } catch (const std::out_of_range&) {
    throw ValidationError("out-of-range value for config key '" + key + "': '" + value + "'");
  }
}

Config Config::from_kv_text(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // strip leading whitespace
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    size_t eq = line.find('=', start);
    if (eq == std::string::npos) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = line.substr(start, eq - start);
    std::string value = line.substr(eq + 1);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    size_t vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    cfg.apply_kv(key, value);
  }
  return cfg;
}

Config Config::from_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_kv_text(ss.str(), path);
}

}  // namespace rar
