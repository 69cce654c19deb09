#include "blac/cli/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>

namespace blac::cli {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

YAML::Node number(double v) { return YAML::Node(fmt::format("{}", v)); }

template <typename T>
T scalar_as(const YAML::Node& n, const std::string& field, const char* type) {
  if (!n.IsScalar()) fail(field, std::string("expected ") + type);
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(field, std::string("expected ") + type + ", got '" + n.Scalar() + "'");
  }
}

template <typename T>
std::vector<T> sequence_as(const YAML::Node& n, const std::string& field, const char* type) {
  if (!n.IsSequence()) fail(field, std::string("expected a list of ") + type);
  std::vector<T> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    out.push_back(scalar_as<T>(n[i], field + "[" + std::to_string(i) + "]", type));
  }
  return out;
}

struct Binder {
  std::vector<Field>& out;
  std::string section;

  void add(const std::string& key, std::function<YAML::Node()> get,
           std::function<void(const YAML::Node&, const std::string&)> set) {
    const std::string name = section + "." + key;
    out.push_back({section, key, std::move(get),
                   [set = std::move(set), name](const YAML::Node& n) { set(n, name); }});
  }

  void real(const std::string& key, double& v) {
    add(key, [&v] { return number(v); },
        [&v](const YAML::Node& n, const std::string& f) { v = scalar_as<double>(n, f, "a number"); });
  }
  void integer(const std::string& key, int& v) {
    add(key, [&v] { return YAML::Node(v); },
        [&v](const YAML::Node& n, const std::string& f) { v = scalar_as<int>(n, f, "an integer"); });
  }
  void count(const std::string& key, std::size_t& v) {
    add(key, [&v] { return YAML::Node(static_cast<unsigned long long>(v)); },
        [&v](const YAML::Node& n, const std::string& f) {
          const long long x = scalar_as<long long>(n, f, "an integer");
          if (x < 0) fail(f, "must be >= 0");
          v = static_cast<std::size_t>(x);
        });
  }
  void flag(const std::string& key, bool& v) {
    add(key, [&v] { return YAML::Node(v); },
        [&v](const YAML::Node& n, const std::string& f) { v = scalar_as<bool>(n, f, "true or false"); });
  }
  void text(const std::string& key, std::string& v) {
    add(key, [&v] { return YAML::Node(v); },
        [&v](const YAML::Node& n, const std::string& f) { v = scalar_as<std::string>(n, f, "a string"); });
  }
  void integers(const std::string& key, std::vector<int>& v) {
    add(key,
        [&v] {
          YAML::Node n(YAML::NodeType::Sequence);
          for (int x : v) n.push_back(x);
          n.SetStyle(YAML::EmitterStyle::Flow);
          return n;
        },
        [&v](const YAML::Node& n, const std::string& f) { v = sequence_as<int>(n, f, "integers"); });
  }
  void seeds(const std::string& key, std::vector<std::uint64_t>& v) {
    add(key,
        [&v] {
          YAML::Node n(YAML::NodeType::Sequence);
          for (auto x : v) n.push_back(static_cast<unsigned long long>(x));
          n.SetStyle(YAML::EmitterStyle::Flow);
          return n;
        },
        [&v](const YAML::Node& n, const std::string& f) {
          v.clear();
          for (auto x : sequence_as<unsigned long long>(n, f, "nonnegative integers")) {
            v.push_back(x);
          }
        });
  }
  template <typename Vec>
  void reals(const std::string& key, Vec& v, int fixed_size) {
    add(key,
        [&v] {
          YAML::Node n(YAML::NodeType::Sequence);
          for (Eigen::Index i = 0; i < v.size(); ++i) n.push_back(number(v[i]));
          n.SetStyle(YAML::EmitterStyle::Flow);
          return n;
        },
        [&v, fixed_size](const YAML::Node& n, const std::string& f) {
          const auto xs = sequence_as<double>(n, f, "numbers");
          if (fixed_size > 0 && static_cast<int>(xs.size()) != fixed_size) {
            fail(f, "expected " + std::to_string(fixed_size) + " numbers");
          }
          if (xs.empty()) fail(f, "expected at least one number");
          Vector tmp = Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
          v = tmp;
        });
  }
  void points(const std::string& key, std::vector<Eigen::Vector2d>& v) {
    add(key,
        [&v] {
          YAML::Node n(YAML::NodeType::Sequence);
          for (const auto& p : v) {
            YAML::Node q(YAML::NodeType::Sequence);
            q.push_back(number(p.x()));
            q.push_back(number(p.y()));
            q.SetStyle(YAML::EmitterStyle::Flow);
            n.push_back(q);
          }
          return n;
        },
        [&v](const YAML::Node& n, const std::string& f) {
          if (!n.IsSequence()) fail(f, "expected a list of [x, y] pairs");
          std::vector<Eigen::Vector2d> pts;
          for (std::size_t i = 0; i < n.size(); ++i) {
            const auto xs = sequence_as<double>(n[i], f + "[" + std::to_string(i) + "]", "numbers");
            if (xs.size() != 2) fail(f + "[" + std::to_string(i) + "]", "expected [x, y]");
            pts.emplace_back(xs[0], xs[1]);
          }
          v = std::move(pts);
        });
  }
};

}  // namespace

std::string Field::env_var() const {
  std::string s = "BLAC_" + section + "_" + key;
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  return s;
}

std::vector<Field> fields(ExperimentConfig& c) {
  std::vector<Field> out;
  trainer::TrainConfig& t = c.train;

  Binder run{out, "run"};
  run.text("env", t.env_id);
  run.text("label", c.label);
  run.text("output_dir", c.output_dir);
  run.seeds("seeds", c.seeds);
  run.integer("checkpoint_every", c.checkpoint_every);

  Binder train{out, "train"};
  train.integer("episodes", t.episodes);
  train.integer("steps_per_episode", t.steps_per_episode);
  train.count("batch_size", t.batch_size);
  train.count("buffer_capacity", t.buffer_capacity);

  Binder ag{out, "agent"};
  agent::AgentConfig& a = t.agent;
  ag.add("variant", [&a] { return YAML::Node(agent::to_string(a.variant)); },
         [&a](const YAML::Node& n, const std::string& f) {
           try {
             a.variant = agent::variant_from_string(scalar_as<std::string>(n, f, "a string"));
           } catch (const std::invalid_argument& e) {
             fail(f, e.what());
           }
         });
  ag.integers("hidden", a.hidden);
  ag.real("gamma", a.gamma);
  ag.real("gamma_c", a.gamma_c);
  ag.real("tau", a.tau);
  ag.real("critic_lr", a.critic_lr);
  ag.real("policy_lr", a.policy_lr);
  ag.real("clf_beta", a.clf_beta);
  ag.real("initial_alpha", a.initial_alpha);
  ag.add("entropy_target",
         [&a] { return a.entropy_target ? number(*a.entropy_target) : YAML::Node(YAML::NodeType::Null); },
         [&a](const YAML::Node& n, const std::string& f) {
           if (n.IsNull() || (n.IsScalar() && n.Scalar() == "auto")) {
             a.entropy_target.reset();
           } else {
             a.entropy_target = scalar_as<double>(n, f, "a number, null or auto");
           }
         });

  Binder lag{out, "lagrangian"};
  lag.real("initial_multiplier", a.lagrangian.initial_multiplier);
  lag.real("initial_penalty", a.lagrangian.initial_penalty);
  lag.real("penalty_growth", a.lagrangian.penalty_growth);
  lag.real("penalty_max", a.lagrangian.penalty_max);
  lag.real("dual_lr", a.lagrangian.dual_lr);

  Binder bk{out, "backup"};
  bk.flag("enabled", t.backup_enabled);
  bk.reals("q_diagonal", t.backup.q_diagonal, 0);
  bk.real("slack_penalty", t.backup.slack_penalty);
  bk.real("kappa", t.backup.kappa);
  bk.real("sigma_margin", t.backup.sigma_margin);

  Binder tr{out, "trigger"};
  tr.integer("window", t.trigger.window);
  tr.real("trap_displacement", t.trigger.trap_displacement);
  tr.real("trap_margin", t.trigger.trap_margin);
  tr.real("resume_distance", t.trigger.resume_distance);
  tr.integer("max_backup_steps", t.trigger.max_backup_steps);
  tr.real("proximity_offset", t.trigger.proximity_offset);
  tr.real("hysteresis", t.trigger.hysteresis);

  Binder gp{out, "gp"};
  gp.flag("enabled", t.gp.enabled);
  gp.real("signal_variance", t.gp.model.kernel.signal_variance);
  gp.reals("length_scales", t.gp.model.kernel.length_scales, 0);
  gp.real("noise_variance", t.gp.model.kernel.noise_variance);
  gp.count("capacity", t.gp.model.capacity);
  gp.integer("stride", t.gp.stride);
  gp.integer("freeze_after_episodes", t.gp.freeze_after_episodes);

  Binder uni{out, "unicycle"};
  envs::UnicycleParams& u = t.unicycle;
  uni.real("dt", u.dt);
  uni.integer("episode_length", u.episode_length);
  uni.reals("destination", u.destination, 2);
  uni.reals("start", u.start, 3);
  uni.points("obstacles", u.obstacles);
  uni.real("safe_distance", u.safe_distance);
  uni.real("lookahead", u.lookahead);
  uni.real("preferred_speed", u.preferred_speed);
  uni.real("speed_weight", u.speed_weight);
  uni.real("progress_weight", u.progress_weight);
  uni.real("residual_gain", u.residual_gain);
  uni.reals("control_lower", u.control_lower, 2);
  uni.reals("control_upper", u.control_upper, 2);
  uni.real("barrier_decay", u.barrier_decay);

  Binder car{out, "car_following"};
  envs::CarFollowingParams& p = t.car_following;
  car.real("dt", p.dt);
  car.integer("episode_length", p.episode_length);
  car.real("preferred_speed", p.preferred_speed);
  car.real("speed_gain", p.speed_gain);
  car.real("brake_gain", p.brake_gain);
  car.real("lead_amplitude", p.lead_amplitude);
  car.real("residual", p.residual);
  car.real("brake_distance", p.brake_distance);
  car.real("rear_brake_distance", p.rear_brake_distance);
  car.real("safe_distance", p.safe_distance);
  car.real("desired_gap", p.desired_gap);
  car.real("band_lower", p.band_lower);
  car.real("band_upper", p.band_upper);
  car.real("band_bonus", p.band_bonus);
  car.real("initial_spacing", p.initial_spacing);
  car.real("control_lower", p.control_lower);
  car.real("control_upper", p.control_upper);
  car.real("barrier_decay", p.barrier_decay);
  return out;
}

void merge(ExperimentConfig& config, const YAML::Node& doc) {
  if (!doc || doc.IsNull()) return;
  if (!doc.IsMap()) throw ConfigError("config: top level must be a mapping of sections");
  std::vector<Field> all = fields(config);
  std::set<std::string> sections;
  for (const Field& f : all) sections.insert(f.section);
  for (const auto& sec : doc) {
    const std::string section = sec.first.as<std::string>();
    if (sections.count(section) == 0) throw ConfigError(section + ": unknown section");
    if (sec.second.IsNull()) continue;
    if (!sec.second.IsMap()) throw ConfigError(section + ": expected a mapping");
    for (const auto& kv : sec.second) {
      const std::string key = kv.first.as<std::string>();
      auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) {
        return f.section == section && f.key == key;
      });
      if (it == all.end()) throw ConfigError(section + "." + key + ": unknown key");
      it->set(kv.second);
    }
  }
}

namespace {

YAML::Node parse_value(const std::string& name, const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(name + ": cannot parse '" + text + "' (" + e.msg + ")");
  }
}

}  // namespace

void apply_env_overrides(ExperimentConfig& config,
                         const std::function<const char*(const char*)>& lookup) {
  for (Field& f : fields(config)) {
    const std::string var = f.env_var();
    if (const char* v = lookup(var.c_str())) f.set(parse_value(var, v));
  }
}

void set_field(ExperimentConfig& config, const std::string& name, const std::string& value) {
  for (Field& f : fields(config)) {
    if (f.name() == name) {
      f.set(parse_value(name, value));
      return;
    }
  }
  throw ConfigError(name + ": unknown key");
}

void validate(const ExperimentConfig& c) {
  if (c.seeds.empty()) throw ConfigError("run.seeds: must list at least one seed");
  if (c.output_dir.empty()) throw ConfigError("run.output_dir: must not be empty");
  if (c.checkpoint_every < 0) throw ConfigError("run.checkpoint_every: must be >= 0");
  const agent::AgentConfig& a = c.train.agent;
  if (a.hidden.empty() ||
      std::any_of(a.hidden.begin(), a.hidden.end(), [](int w) { return w <= 0; })) {
    throw ConfigError("agent.hidden: needs at least one positive width");
  }
  if (!(a.gamma >= 0.0 && a.gamma < 1.0)) throw ConfigError("agent.gamma: must lie in [0, 1)");
  if (!(a.gamma_c >= 0.0 && a.gamma_c < 1.0)) {
    throw ConfigError("agent.gamma_c: must lie in [0, 1)");
  }
  if (!(a.tau > 0.0 && a.tau <= 1.0)) throw ConfigError("agent.tau: must lie in (0, 1]");
  if (!(a.critic_lr > 0.0)) throw ConfigError("agent.critic_lr: must be > 0");
  if (!(a.policy_lr > 0.0)) throw ConfigError("agent.policy_lr: must be > 0");
  if (!(a.clf_beta > 0.0 && a.clf_beta < 1.0)) {
    throw ConfigError("agent.clf_beta: must lie in (0, 1)");
  }
  if (!(a.initial_alpha > 0.0)) throw ConfigError("agent.initial_alpha: must be > 0");
  const agent::LagrangianOptions& l = a.lagrangian;
  if (l.initial_multiplier < 0.0) {
    throw ConfigError("lagrangian.initial_multiplier: must be >= 0");
  }
  if (!(l.initial_penalty > 0.0)) throw ConfigError("lagrangian.initial_penalty: must be > 0");
  if (!(l.penalty_growth >= 1.0)) throw ConfigError("lagrangian.penalty_growth: must be >= 1");
  if (!(l.penalty_max >= l.initial_penalty)) {
    throw ConfigError("lagrangian.penalty_max: must be >= initial_penalty");
  }
  if (!(l.dual_lr > 0.0)) throw ConfigError("lagrangian.dual_lr: must be > 0");
  const envs::UnicycleParams& u = c.train.unicycle;
  if (!(u.dt > 0.0)) throw ConfigError("unicycle.dt: must be > 0");
  if (u.episode_length < 0) throw ConfigError("unicycle.episode_length: must be >= 0");
  if ((u.control_lower.array() > u.control_upper.array()).any()) {
    throw ConfigError("unicycle.control_lower: must not exceed control_upper");
  }
  if (!(u.barrier_decay >= 0.0 && u.barrier_decay <= 1.0)) {
    throw ConfigError("unicycle.barrier_decay: must lie in [0, 1]");
  }
  const envs::CarFollowingParams& p = c.train.car_following;
  if (!(p.dt > 0.0)) throw ConfigError("car_following.dt: must be > 0");
  if (p.episode_length < 0) throw ConfigError("car_following.episode_length: must be >= 0");
  if (p.control_lower > p.control_upper) {
    throw ConfigError("car_following.control_lower: must not exceed control_upper");
  }
  if (!(p.barrier_decay >= 0.0 && p.barrier_decay <= 1.0)) {
    throw ConfigError("car_following.barrier_decay: must lie in [0, 1]");
  }
  try {
    trainer::validate(c.train);
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.rfind("env:", 0) == 0 ? "run." + msg : msg);
  }
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig config;
  if (!path.empty()) {
    YAML::Node doc;
    try {
      doc = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
      throw ConfigError("config: cannot open '" + path + "'");
    } catch (const YAML::Exception& e) {
      throw ConfigError("config: " + path + ": " + e.what());
    }
    merge(config, doc);
  }
  apply_env_overrides(config, [](const char* name) { return std::getenv(name); });
  validate(config);
  return config;
}

YAML::Node to_yaml(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  YAML::Node root(YAML::NodeType::Map);
  for (const Field& f : fields(copy)) root[f.section][f.key] = f.get();
  return root;
}

std::string dump(const ExperimentConfig& config) {
  YAML::Emitter out;
  out << to_yaml(config);
  return std::string(out.c_str()) + "\n";
}

}  // namespace blac::cli
