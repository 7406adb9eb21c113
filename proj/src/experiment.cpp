// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "csidt/kv_text.hpp"

namespace fs = std::filesystem;

namespace csidt {

void ExperimentConfig::validate() const {
  try {
    system.validate();
    topology.validate();
    train.validate();
    finetune.validate();
    perturb.validate();
    if (!(bs_swap_phase_error_deg >= 0.0 && bs_swap_phase_error_deg <= 180.0)) {
      throw InvalidArgument("antenna_study: BS swap phase error must lie in [0, 180] degrees");
    }
    if (topology.input_dim() != 2 * system.n_tx * system.n_streams ||
        topology.n_streams != system.n_streams) {
      throw InvalidArgument("neural topology does not match the system dimensions");
    }
    if (quantizer.bits < 1 || quantizer.bits > 16) throw InvalidArgument("neural.bits must lie in [1, 16]");
    if (subband_stride < 1 || rate_subcarrier_stride < 1) throw InvalidArgument("strides must be >= 1");
    for (double f : {dt_test_fraction, ol_fraction, bs_ol_fraction}) {
      if (!(f > 0.0 && f < 1.0)) throw InvalidArgument("split fractions must lie in (0, 1)");
    }
    if (type2_beams.empty() || type2_beams.size() != type2_paper_bits.size()) {
      throw InvalidArgument("type2.beams and type2.paper_bits must be non-empty and of equal length");
    }
    for (int l : type2_beams) {
      Type2Config t = type2;
      t.n_beams = l;
      t.validate(system.n_tx);
    }
    if (cluster_draws < 1) throw InvalidArgument("cluster.draws must be positive");
    if (max_paths < 1) throw InvalidArgument("scene.max_paths must be positive");
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

bool parse_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw FormatError("expected true or false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  for (double d : parse_list(v)) {
    if (d != std::floor(d)) throw FormatError("expected integers in '" + v + "'");
    out.push_back(static_cast<int>(d));
  }
  return out;
}

std::string format_int_list(const std::vector<int>& v) {
  return format_list(std::vector<double>(v.begin(), v.end()));
}

// Hidden widths live outside Topology until the input/latent sizes are known.
struct TopologyParts {
  std::vector<int> encoder_hidden{512, 256};
  std::vector<int> decoder_hidden{256, 512};
  int latent = 16;
  double slope = 0.1;
};

TopologyParts split_topology(const Topology& t) {
  TopologyParts p;
  p.encoder_hidden.assign(t.encoder.begin() + 1, t.encoder.end() - 1);
  p.decoder_hidden.assign(t.decoder.begin() + 1, t.decoder.end() - 1);
  p.latent = t.latent_dim();
  p.slope = t.leaky_slope;
  return p;
}

Topology join_topology(const TopologyParts& p, const SystemConfig& sys) {
  Topology t;
  const int d = 2 * sys.n_tx * sys.n_streams;
  t.encoder = {d};
  t.encoder.insert(t.encoder.end(), p.encoder_hidden.begin(), p.encoder_hidden.end());
  t.encoder.push_back(p.latent);
  t.decoder = {p.latent};
  t.decoder.insert(t.decoder.end(), p.decoder_hidden.begin(), p.decoder_hidden.end());
  t.decoder.push_back(d);
  t.n_streams = sys.n_streams;
  t.leaky_slope = p.slope;
  return t;
}

std::string opt_pattern(const std::optional<PatternSpec>& p) { return p ? format_pattern(*p) : "none"; }

std::vector<Field> fields(ExperimentConfig& c, TopologyParts& tp) {
  std::vector<Field> f;
  auto add_int = [&](std::string s, std::string k, int& v) {
    f.push_back({s, k, [&v](const std::string& x) { v = static_cast<int>(parse_int(x)); },
                 [&v] { return std::to_string(v); }});
  };
  auto add_double = [&](std::string s, std::string k, double& v) {
    f.push_back({s, k, [&v](const std::string& x) { v = parse_double(x); },
                 [&v] { return format_double(v); }});
  };
  auto add_bool = [&](std::string s, std::string k, bool& v) {
    f.push_back({s, k, [&v](const std::string& x) { v = parse_bool(x); },
                 [&v] { return std::string(v ? "true" : "false"); }});
  };
  auto add_string = [&](std::string s, std::string k, std::string& v) {
    f.push_back({s, k, [&v](const std::string& x) { v = x; }, [&v] { return v; }});
  };
  auto add_pattern = [&](std::string s, std::string k, PatternSpec& v) {
    f.push_back({s, k, [&v](const std::string& x) { v = parse_pattern(x); },
                 [&v] { return format_pattern(v); }});
  };
  auto add_opt_pattern = [&](std::string s, std::string k, std::optional<PatternSpec>& v) {
    f.push_back({s, k,
                 [&v](const std::string& x) {
                   if (x == "none") v.reset();
                   else v = parse_pattern(x);
                 },
                 [&v] { return opt_pattern(v); }});
  };
  auto add_int_list = [&](std::string s, std::string k, std::vector<int>& v) {
    f.push_back({s, k, [&v](const std::string& x) { v = parse_int_list(x); },
                 [&v] { return format_int_list(v); }});
  };
  auto add_seed = [&](std::string s, std::string k, std::uint64_t& v) {
    f.push_back({s, k,
                 [&v](const std::string& x) {
                   const auto n = parse_int(x);
                   if (n < 0) throw FormatError("seed must be non-negative");
                   v = static_cast<std::uint64_t>(n);
                 },
                 [&v] { return std::to_string(v); }});
  };
  auto add_size = [&](std::string s, std::string k, std::size_t& v) {
    f.push_back({s, k,
                 [&v](const std::string& x) {
                   const auto n = parse_int(x);
                   if (n < 0) throw FormatError("must be non-negative");
                   v = static_cast<std::size_t>(n);
                 },
                 [&v] { return std::to_string(v); }});
  };

  add_string("experiment", "name", c.name);
  add_seed("experiment", "seed", c.seed);

  add_int("system", "n_tx", c.system.n_tx);
  add_int("system", "n_rx", c.system.n_rx);
  add_int("system", "n_streams", c.system.n_streams);
  add_int("system", "n_subcarriers", c.system.grid.n_subcarriers);
  add_double("system", "subcarrier_spacing_hz", c.system.grid.subcarrier_spacing_hz);
  add_double("system", "carrier_hz", c.system.grid.carrier_hz);
  add_int("system", "n_subbands", c.system.grid.n_subbands);

  add_string("scene", "indoor", c.indoor_scene);
  add_string("scene", "outdoor", c.outdoor_scene);
  add_double("scene", "bs_height_m", c.preset.bs_height_m);
  add_double("scene", "indoor_grid_pitch_m", c.preset.indoor_grid_pitch_m);
  add_pattern("scene", "bs_pattern", c.preset.bs_pattern);
  add_pattern("scene", "ue_pattern", c.preset.ue_pattern);
  add_size("scene", "max_paths", c.max_paths);

  add_int("cluster", "n_clusters", c.cluster.n_clusters);
  add_int("cluster", "rays_per_cluster", c.cluster.rays_per_cluster);
  add_double("cluster", "delay_spread_s", c.cluster.delay_spread_s);
  add_double("cluster", "angular_spread_deg", c.cluster.angular_spread_deg);
  add_double("cluster", "power_decay", c.cluster.power_decay);
  add_double("cluster", "aod_sector_deg", c.cluster.aod_sector_deg);
  add_double("cluster", "elevation_spread_deg", c.cluster.elevation_spread_deg);
  add_int("cluster", "layouts", c.cluster.layouts);
  add_int("cluster", "draws", c.cluster_draws);
  add_opt_pattern("cluster", "bs_pattern", c.cluster_bs_pattern);

  add_opt_pattern("perturb", "bs_pattern", c.perturb.bs_pattern_swap);
  add_opt_pattern("perturb", "ue_pattern", c.perturb.ue_pattern_swap);
  add_double("perturb", "gamma_jitter", c.perturb.gamma_jitter);
  add_double("perturb", "bs_phase_error_deg", c.perturb.bs_phase_error_deg);
  add_int("perturb", "diffuse_paths", c.perturb.diffuse_paths);
  add_double("perturb", "diffuse_power_db", c.perturb.diffuse_power_db);
  add_double("perturb", "diffuse_max_excess_s", c.perturb.diffuse_max_excess_s);
  f.push_back({"perturb", "noise_snr_db",
               [&c](const std::string& x) {
                 if (x == "none") c.perturb.estimation_noise_snr_db.reset();
                 else c.perturb.estimation_noise_snr_db = parse_double(x);
               },
               [&c] {
                 return c.perturb.estimation_noise_snr_db
                            ? format_double(*c.perturb.estimation_noise_snr_db)
                            : std::string("none");
               }});

  add_pattern("antenna_study", "ue_swap", c.ue_swap);
  add_pattern("antenna_study", "bs_swap", c.bs_swap);
  add_double("antenna_study", "bs_swap_phase_error_deg", c.bs_swap_phase_error_deg);

  add_int_list("neural", "encoder_hidden", tp.encoder_hidden);
  add_int_list("neural", "decoder_hidden", tp.decoder_hidden);
  add_int("neural", "latent", tp.latent);
  add_double("neural", "leaky_slope", tp.slope);
  add_int("neural", "bits", c.quantizer.bits);
  add_int("neural", "paper_bits", c.neural_paper_bits);

  for (auto [name, t] : {std::pair<const char*, TrainConfig*>{"train", &c.train},
                          std::pair<const char*, TrainConfig*>{"finetune", &c.finetune}}) {
    add_double(name, "learning_rate", t->learning_rate);
    add_int(name, "batch_size", t->batch_size);
    add_int(name, "epochs", t->epochs);
    add_double(name, "validation_fraction", t->validation_fraction);
    add_bool(name, "ste", t->ste);
  }
  add_int("train", "subband_stride", c.subband_stride);
  add_double("train", "dt_test_fraction", c.dt_test_fraction);
  add_double("finetune", "ol_fraction", c.ol_fraction);
  add_double("finetune", "bs_ol_fraction", c.bs_ol_fraction);

  add_int_list("type2", "beams", c.type2_beams);
  add_int_list("type2", "paper_bits", c.type2_paper_bits);
  add_int("type2", "oversampling", c.type2.oversampling);
  add_int("type2", "amplitude_bits", c.type2.amplitude_bits);
  add_int("type2", "phase_bits", c.type2.phase_bits);
  add_bool("type2", "wideband", c.type2.wideband);

  add_double("eval", "snr_db", c.snr_db);
  add_bool("eval", "rho_squared", c.rho_squared);
  add_int("eval", "rate_subcarrier_stride", c.rate_subcarrier_stride);
  return f;
}

// Shipped study: directive DT BS panel on a 0.25 m corridor grid, an RW
// proxy whose BS array carries per-element calibration offsets, a swapped
// BS antenna with a wider element and its own offsets, and a cluster
// baseline with one fixed layout seen through a broad sector element.
ExperimentConfig defaults() {
  ExperimentConfig c;
  c.preset.bs_pattern = PatternSpec::patch(8.0);
  c.preset.indoor_grid_pitch_m = 0.25;
  c.cluster.layouts = 1;
  c.cluster_bs_pattern = PatternSpec::patch(1.0);
  c.perturb.bs_pattern_swap.reset();
  c.perturb.bs_phase_error_deg = 40.0;
  c.bs_swap = PatternSpec::patch(6.0);
  c.bs_swap_phase_error_deg = 150.0;
  c.subband_stride = 2;
  c.finetune.epochs = 40;
  return c;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text) {
  KvDocument doc;
  try {
    doc = parse_kv_text(text);
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c = defaults();
  TopologyParts tp = split_topology(c.topology);
  auto table = fields(c, tp);
  std::set<std::string> seen_sections;
  for (const auto& sec : doc.sections) {
    if (!seen_sections.insert(sec.name).second) {
      throw ConfigError("config: section [" + sec.name + "] appears twice");
    }
    const bool known = std::any_of(table.begin(), table.end(),
                                   [&](const Field& f) { return f.section == sec.name; });
    if (!known) throw ConfigError("config: unknown section [" + sec.name + "]");
    for (const auto& [key, value] : sec.entries) {
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const Field& f) { return f.section == sec.name && f.key == key; });
      if (it == table.end()) throw ConfigError("config: unknown key '" + sec.name + "." + key + "'");
      try {
        it->set(value);
      } catch (const Error& e) {
        throw ConfigError("config: bad value for '" + sec.name + "." + key + "': " + e.what());
      } catch (const std::exception& e) {
        throw ConfigError("config: bad value for '" + sec.name + "." + key + "': " + e.what());
      }
    }
  }
  c.topology = join_topology(tp, c.system);
  c.preset.n_tx = c.system.n_tx;
  c.preset.n_rx = c.system.n_rx;
  c.preset.carrier_hz = c.system.grid.carrier_hz;
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_text_file(path));
}

std::string format_experiment_config(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  TopologyParts tp = split_topology(c.topology);
  const auto table = fields(c, tp);
  // Sections in order of first appearance, each written once.
  std::vector<std::string> sections;
  for (const auto& f : table)
    if (std::find(sections.begin(), sections.end(), f.section) == sections.end()) sections.push_back(f.section);
  std::ostringstream out;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i) out << '\n';
    out << '[' << sections[i] << "]\n";
    for (const auto& f : table)
      if (f.section == sections[i]) out << f.key << " = " << f.get() << '\n';
  }
  return out.str();
}

namespace {

// Independent seed streams for each artefact of a run.
enum SeedSlot : std::uint64_t {
  kSeedDtIndoor = 1,
  kSeedRwProxy,
  kSeedCluster,
  kSeedDtOutdoor,
  kSeedChangeUe,
  kSeedChangeBs,
  kSeedTestSplit,
  kSeedOlSplit,
  kSeedBsOlSplit,
  kSeedModel = 100,
  kSeedTrain = 200,
  kSeedFinetune = 300,
};

std::uint64_t seed_for(const ExperimentConfig& cfg, std::uint64_t slot) { return mix_seed(cfg.seed, slot); }

ScenePreset make_preset(const ExperimentConfig& cfg, const std::string& name) {
  return preset_scene(name, cfg.preset);
}

}  // namespace

Corpora build_corpora(const ExperimentConfig& cfg, int jobs) {
  Corpora c;
  BuildOptions opts;
  opts.max_paths = cfg.max_paths;
  opts.jobs = jobs;
  c.dt_indoor = build_corpus(make_preset(cfg, cfg.indoor_scene), cfg.indoor_scene, cfg.system,
                             seed_for(cfg, kSeedDtIndoor), opts);
  c.dt_outdoor = build_corpus(make_preset(cfg, cfg.outdoor_scene), cfg.outdoor_scene, cfg.system,
                              seed_for(cfg, kSeedDtOutdoor), opts);
  c.rw_proxy = perturb_corpus(c.dt_indoor, cfg.perturb, seed_for(cfg, kSeedRwProxy), jobs);

  const auto indoor = make_preset(cfg, cfg.indoor_scene);
  AntennaArray ue = indoor.ue;
  ue.position = indoor.ue_grid.front();
  AntennaArray bs = indoor.bs;
  if (cfg.cluster_bs_pattern) bs.pattern = *cfg.cluster_bs_pattern;
  c.cluster = build_cluster_corpus(cfg.cluster, bs, ue, cfg.system, cfg.cluster_draws,
                                   seed_for(cfg, kSeedCluster), jobs);

  PerturbSpec ue_only;
  ue_only.ue_pattern_swap = cfg.ue_swap;
  c.change_ue = perturb_corpus(c.dt_indoor, ue_only, seed_for(cfg, kSeedChangeUe), jobs);
  PerturbSpec bs_only;
  bs_only.bs_pattern_swap = cfg.bs_swap;
  bs_only.bs_phase_error_deg = cfg.bs_swap_phase_error_deg;
  c.change_bs = perturb_corpus(c.dt_indoor, bs_only, seed_for(cfg, kSeedChangeBs), jobs);
  return c;
}

Splits make_splits(const ExperimentConfig& cfg, const Corpus& dt_indoor, const Corpus& rw_proxy,
                   const Corpus& change_bs) {
  Splits s;
  const auto test = ol_split(dt_indoor, cfg.dt_test_fraction, seed_for(cfg, kSeedTestSplit));
  s.dt_test = test.ol.position_ids();
  s.dt_train = test.eval.position_ids();
  const auto rw = ol_split(rw_proxy, cfg.ol_fraction, seed_for(cfg, kSeedOlSplit));
  s.rw_ol = rw.ol.position_ids();
  s.rw_eval = rw.eval.position_ids();
  const auto bs = ol_split(change_bs, cfg.bs_ol_fraction, seed_for(cfg, kSeedBsOlSplit));
  s.bs_ol = bs.ol.position_ids();
  s.bs_eval = bs.eval.position_ids();
  return s;
}

std::vector<Precoder> select_precoders(const Corpus& c, const std::vector<int>& positions, int stride) {
  const std::set<int> keep(positions.begin(), positions.end());
  std::vector<Precoder> out;
  for (const auto& r : c.records) {
    if (!positions.empty() && !keep.count(r.position_id)) continue;
    for (std::size_t i = 0; i < r.precoders.size(); i += static_cast<std::size_t>(stride)) {
      out.push_back(r.precoders[i]);
    }
  }
  return out;
}

TrainResult<float> train_model(const ExperimentConfig& cfg, std::span<const Precoder> data, int slot) {
  auto init = ModelParams<float>::init(cfg.topology, seed_for(cfg, kSeedModel + slot));
  TrainConfig t = cfg.train;
  t.seed = seed_for(cfg, kSeedTrain + slot);
  return train(init, data, cfg.quantizer, t);
}

TrainResult<float> finetune_model(const ExperimentConfig& cfg, const ModelParams<float>& model,
                                  std::span<const Precoder> ol, int slot) {
  TrainConfig t = cfg.finetune;
  t.seed = seed_for(cfg, kSeedFinetune + slot);
  return finetune_decoder(model, ol, cfg.quantizer, t);
}

std::vector<Precoder> neural_reconstruct(const ExperimentConfig& cfg, const ModelParams<float>& model,
                                         std::span<const Precoder> ps) {
  return reconstruct(model, ps, cfg.quantizer, true);
}

std::vector<Precoder> type2_reconstruct(const Type2Config& cfg, std::span<const Precoder> ps) {
  std::vector<Precoder> out;
  out.reserve(ps.size());
  for (const auto& p : ps) {
    const auto bits = encode_type2(p, cfg);
    auto r = decode_type2(bits, cfg, static_cast<int>(p.n_tx()), static_cast<int>(p.n_streams()));
    r.subband = p.subband;
    r.position = p.position;
    r.domain = p.domain;
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min(n, static_cast<std::size_t>(std::clamp(jobs, 1, 256)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex m;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<double> corpus_rates(const ExperimentConfig& cfg, const Corpus& c,
                                 const std::vector<int>& positions,
                                 const std::vector<std::vector<Precoder>>& methods, int jobs) {
  const std::set<int> keep(positions.begin(), positions.end());
  std::vector<const CorpusRecord*> records;
  for (const auto& r : c.records)
    if (positions.empty() || keep.count(r.position_id)) records.push_back(&r);
  const auto n_sub = static_cast<std::size_t>(cfg.system.grid.n_subbands);
  for (const auto& m : methods) {
    if (m.size() != records.size() * n_sub) {
      throw DimensionError("corpus_rates: reconstruction count does not match the corpus subset");
    }
  }
  const double snr = std::pow(10.0, cfg.snr_db / 10.0);
  const int per_band = cfg.system.grid.subcarriers_per_subband();
  // Per-record sums are reduced in record order so the result does not
  // depend on the number of workers.
  std::vector<std::vector<double>> sums(records.size(), std::vector<double>(methods.size(), 0.0));
  std::vector<std::size_t> counts(records.size(), 0);
  parallel_for(records.size(), jobs, [&](std::size_t k) {
    const auto ch = record_channel(c.header, *records[k]);
    const auto stride = static_cast<std::size_t>(cfg.rate_subcarrier_stride);
    // snr_db is per receive antenna after normalising the record to unit
    // mean entry power.
    double power = 0.0;
    std::size_t entries = 0;
    for (std::size_t n = 0; n < ch.subcarriers.size(); n += stride) {
      power += ch.subcarriers[n].squaredNorm();
      entries += static_cast<std::size_t>(ch.subcarriers[n].size());
    }
    power /= static_cast<double>(entries);
    const double snr_k = power > 0.0 ? snr / power : 0.0;
    for (std::size_t n = 0; n < ch.subcarriers.size(); n += stride) {
      const auto band = n / static_cast<std::size_t>(per_band);
      for (std::size_t m = 0; m < methods.size(); ++m) {
        sums[k][m] += mmse_rate(ch.subcarriers[n], methods[m][k * n_sub + band].w, snr_k);
      }
      ++counts[k];
    }
  });
  std::vector<double> out(methods.size(), 0.0);
  std::size_t total = 0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    for (std::size_t m = 0; m < methods.size(); ++m) out[m] += sums[k][m];
    total += counts[k];
  }
  for (auto& v : out) v /= static_cast<double>(total);
  return out;
}

namespace {

struct Probe {
  const char* label;
  double x, y, z;
};

// A4, D4 and F4 sit in the strong-signal part of the corridor near the BS,
// G and H further down where the signal is weaker.
constexpr Probe kProbes[] = {
    {"A4", 2.5, 2.0, 1.2}, {"D4", 5.5, 3.0, 1.2}, {"F4", 8.5, 4.0, 1.2},
    {"G", 14.5, 5.0, 1.2}, {"H", 18.5, 1.0, 1.2},
};

const CorpusRecord& nearest(const Corpus& c, const Vec3& p) {
  if (c.records.empty()) throw InvalidArgument("probe lookup on an empty corpus");
  const CorpusRecord* best = &c.records.front();
  for (const auto& r : c.records)
    if ((r.position - p).norm() < (best->position - p).norm()) best = &r;
  return *best;
}

std::vector<Vec3> strongest_arrivals(const CorpusHeader& h, const CorpusRecord& r, std::size_t n) {
  const auto ue = record_ue(h, r);
  std::vector<std::pair<double, Vec3>> ranked;
  for (const auto& p : r.paths.paths) {
    const double power = std::norm(p.gain) * std::pow(h.bs.gain(p.aod) * ue.gain(p.aoa), 2);
    ranked.emplace_back(power, p.aoa);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) out.push_back(ranked[i].second);
  return out;
}

}  // namespace

std::vector<ProbeRow> path_similarity_table(const Corpus& dt, const Corpus& rw) {
  std::vector<ProbeRow> rows;
  for (const auto& probe : kProbes) {
    const auto& d = nearest(dt, Vec3(probe.x, probe.y, probe.z));
    const auto it = std::find_if(rw.records.begin(), rw.records.end(),
                                 [&](const CorpusRecord& r) { return r.position_id == d.position_id; });
    if (it == rw.records.end()) throw MissingInput(std::string("probe ") + probe.label + " missing in RW corpus");
    const auto a = strongest_arrivals(dt.header, d, 2);
    const auto b = strongest_arrivals(rw.header, *it, 2);
    if (a.size() < 2 || b.size() < 2) throw NumericalError(std::string("probe ") + probe.label + " has fewer than two paths");
    ProbeRow row;
    row.label = probe.label;
    row.position_id = d.position_id;
    row.eta_primary = aoa_similarity(DirectionAngles::from_vector(a[0]), DirectionAngles::from_vector(b[0]));
    row.eta_secondary = aoa_similarity(DirectionAngles::from_vector(a[1]), DirectionAngles::from_vector(b[1]));
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// File-level stages.

namespace {

std::string corpus_path(const std::string& out, const std::string& name) {
  if (name == "change_ue" || name == "change_bs") return out + "/corpora/antenna/" + name + ".csidt";
  return out + "/corpora/" + name + ".csidt";
}

std::string model_path(const std::string& out, const std::string& name) {
  return out + "/models/" + name + ".ckpt";
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_file(const std::string& path, std::string_view text) {
  fs::create_directories(fs::path(path).parent_path());
  write_text_file(path, text);
}

void write_history(const std::string& path, const std::vector<EpochStats>& h, int best) {
  std::ostringstream out;
  out << "# csidt-history-v1 best_epoch=" << best << '\n';
  out << "epoch,train_loss,train_loss_median,validation_loss\n";
  for (const auto& e : h) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.train_loss_median)
        << ',' << format_double(e.validation_loss) << '\n';
  }
  write_file(path, out.str());
}

ModelParams<float> load_slot(const ExperimentConfig& cfg, const std::string& out, const std::string& name) {
  return load_model<float>(model_path(out, name), &cfg.topology);
}

void check_dims(const ExperimentConfig& cfg, const Corpus& c, const std::string& name) {
  const auto& s = c.header.system;
  if (s.n_tx != cfg.system.n_tx || s.n_rx != cfg.system.n_rx || s.n_streams != cfg.system.n_streams ||
      s.grid.n_subbands != cfg.system.grid.n_subbands ||
      s.grid.n_subcarriers != cfg.system.grid.n_subcarriers) {
    throw DimensionError("corpus '" + name + "' dimensions do not match the configuration");
  }
}

Corpus load_named(const ExperimentConfig& cfg, const std::string& out, const std::string& name) {
  auto c = load_corpus(corpus_path(out, name));
  check_dims(cfg, c, name);
  return c;
}

}  // namespace

void cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir, int jobs) {
  cfg.validate();
  const auto corpora = build_corpora(cfg, jobs);
  write_file(out_dir + "/config.txt", format_experiment_config(cfg));
  const std::pair<std::string, const Corpus*> all[] = {
      {"dt_indoor", &corpora.dt_indoor}, {"rw_proxy", &corpora.rw_proxy},
      {"cluster", &corpora.cluster},     {"dt_outdoor", &corpora.dt_outdoor},
      {"change_ue", &corpora.change_ue}, {"change_bs", &corpora.change_bs},
  };
  std::ostringstream manifest;
  manifest << "# csidt-manifest-v1\n";
  manifest << "name,file,domain,scene,positions,failures,bytes,fnv1a\n";
  for (const auto& [name, c] : all) {
    const auto path = corpus_path(out_dir, name);
    const auto bytes = serialize_corpus(*c);
    write_file(path, bytes);
    std::ostringstream failures;
    write_failure_manifest(failures, *c);
    write_file(fs::path(path).replace_extension(".failures.csv").string(), failures.str());
    manifest << name << ',' << fs::relative(path, out_dir + "/corpora").generic_string() << ','
             << to_string(c->header.domain) << ',' << c->header.scene_name << ',' << c->records.size()
             << ',' << c->failures.size() << ',' << bytes.size() << ',' << hex64(fnv1a(bytes)) << '\n';
  }
  write_file(out_dir + "/corpora/manifest.csv", manifest.str());
}

void cmd_train(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto dt = load_named(cfg, out_dir, "dt_indoor");
  const auto rw = load_named(cfg, out_dir, "rw_proxy");
  const auto bs = load_named(cfg, out_dir, "change_bs");
  const auto splits = make_splits(cfg, dt, rw, bs);
  const std::vector<int> all;
  for (int slot = 0; slot < 3; ++slot) {
    std::vector<Precoder> data;
    if (slot == 0) {
      data = select_precoders(dt, splits.dt_train, cfg.subband_stride);
    } else {
      const auto c = load_named(cfg, out_dir, slot == 1 ? "dt_outdoor" : "cluster");
      data = select_precoders(c, all, cfg.subband_stride);
    }
    const auto r = train_model(cfg, data, slot);
    save_model(model_path(out_dir, kModelNames[slot]), r.params);
    write_history(out_dir + "/models/history_" + kModelNames[slot] + ".csv", r.history, r.best_epoch);
  }
}

void cmd_finetune(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto dt = load_named(cfg, out_dir, "dt_indoor");
  const auto rw = load_named(cfg, out_dir, "rw_proxy");
  const auto bs = load_named(cfg, out_dir, "change_bs");
  const auto splits = make_splits(cfg, dt, rw, bs);
  const auto ol = select_precoders(rw, splits.rw_ol);
  for (int slot = 0; slot < 3; ++slot) {
    const auto model = load_slot(cfg, out_dir, kModelNames[slot]);
    const auto r = finetune_model(cfg, model, ol, slot);
    const std::string name = std::string(kModelNames[slot]) + "_ol";
    save_model(model_path(out_dir, name), r.params);
    write_history(out_dir + "/models/history_" + name + ".csv", r.history, r.best_epoch);
  }
  const auto model = load_slot(cfg, out_dir, "indoor");
  const auto r = finetune_model(cfg, model, select_precoders(bs, splits.bs_ol), 3);
  save_model(model_path(out_dir, "indoor_bs_ol"), r.params);
  write_history(out_dir + "/models/history_indoor_bs_ol.csv", r.history, r.best_epoch);
}

void cmd_eval(const ExperimentConfig& cfg, const std::string& out_dir, int jobs) {
  cfg.validate();
  const auto dt = load_named(cfg, out_dir, "dt_indoor");
  const auto rw = load_named(cfg, out_dir, "rw_proxy");
  const auto ue = load_named(cfg, out_dir, "change_ue");
  const auto bs = load_named(cfg, out_dir, "change_bs");
  const auto splits = make_splits(cfg, dt, rw, bs);
  const auto rw_true = select_precoders(rw, splits.rw_eval);
  const auto dt_true = select_precoders(dt, splits.dt_test);
  const bool sq = cfg.rho_squared;

  std::vector<SummaryRow> rows;
  std::vector<std::vector<Precoder>> rw_methods;
  rows.push_back({"Perfect", "-", "inf", "-", 1.0, 1.0, 0.0});
  rw_methods.push_back(rw_true);

  for (int slot = 0; slot < 3; ++slot) {
    for (const bool ol : {false, true}) {
      const std::string name = std::string(kModelNames[slot]) + (ol ? "_ol" : "");
      const auto model = load_slot(cfg, out_dir, name);
      auto rw_hat = neural_reconstruct(cfg, model, rw_true);
      const auto dt_hat = neural_reconstruct(cfg, model, dt_true);
      SummaryRow r;
      r.method = std::string("Neural") + (ol ? "+OL" : "");
      r.training_env = slot == 0 ? "Indoor DT" : slot == 1 ? "Outdoor DT" : "Cluster";
      r.bits = std::to_string(cfg.feedback_bits());
      r.paper_bits = std::to_string(cfg.neural_paper_bits);
      r.rho_rw = mean_rho(rw_true, rw_hat, sq);
      r.rho_dt = mean_rho(dt_true, dt_hat, sq);
      rows.push_back(r);
      rw_methods.push_back(std::move(rw_hat));
    }
  }
  for (std::size_t i = 0; i < cfg.type2_beams.size(); ++i) {
    Type2Config t = cfg.type2;
    t.n_beams = cfg.type2_beams[i];
    auto rw_hat = type2_reconstruct(t, rw_true);
    const auto dt_hat = type2_reconstruct(t, dt_true);
    SummaryRow r;
    r.method = "Type II L=" + std::to_string(t.n_beams);
    r.training_env = "-";
    r.bits = std::to_string(overhead_bits(t, cfg.system.n_tx, cfg.system.n_streams));
    r.paper_bits = std::to_string(cfg.type2_paper_bits[i]);
    r.rho_rw = mean_rho(rw_true, rw_hat, sq);
    r.rho_dt = mean_rho(dt_true, dt_hat, sq);
    rows.push_back(r);
    rw_methods.push_back(std::move(rw_hat));
  }
  const auto rates = corpus_rates(cfg, rw, splits.rw_eval, rw_methods, jobs);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rate = rates[i];
  std::ostringstream t2;
  write_summary_csv(t2, rows);
  write_file(out_dir + "/eval/table2.csv", t2.str());

  // Antenna study on held-out DT positions that are not used for BS-swap OL.
  const std::set<int> bs_ol(splits.bs_ol.begin(), splits.bs_ol.end());
  std::vector<int> probe;
  for (int id : splits.dt_test)
    if (!bs_ol.count(id)) probe.push_back(id);
  const auto indoor = load_slot(cfg, out_dir, "indoor");
  const auto bs_model = load_slot(cfg, out_dir, "indoor_bs_ol");
  auto score = [&](const ModelParams<float>& m, const Corpus& c) {
    const auto truth = select_precoders(c, probe);
    return mean_rho(truth, neural_reconstruct(cfg, m, truth), sq);
  };
  const Table3Row t3rows[] = {
      {"Original", score(indoor, dt)},
      {"Change UE", score(indoor, ue)},
      {"Change BS", score(indoor, bs)},
      {"Change BS + OL", score(bs_model, bs)},
  };
  std::ostringstream t3;
  t3 << "# csidt-table3-v1 ue_swap=" << format_pattern(cfg.ue_swap)
     << " bs_swap=" << format_pattern(cfg.bs_swap) << '\n';
  t3 << "scenario,rho\n";
  for (const auto& r : t3rows) t3 << r.scenario << ',' << fixed(r.rho) << '\n';
  write_file(out_dir + "/eval/table3.csv", t3.str());
}

void cmd_report(const std::string& run_dir) {
  const auto config_path = run_dir + "/config.txt";
  if (!fs::exists(config_path)) throw MissingInput("run directory '" + run_dir + "' has no config.txt");
  const auto cfg = load_experiment_config(config_path);
  for (const char* f : {"/eval/table2.csv", "/eval/table3.csv"}) {
    if (!fs::exists(run_dir + f)) throw MissingInput("run directory is incomplete: missing " + run_dir + f);
  }
  const auto dt = load_named(cfg, run_dir, "dt_indoor");
  const auto rw = load_named(cfg, run_dir, "rw_proxy");

  std::ostringstream t1;
  t1 << "# csidt-table1-v1\n";
  t1 << "path";
  const auto probes = path_similarity_table(dt, rw);
  for (const auto& p : probes) t1 << ',' << p.label;
  t1 << "\nprimary";
  for (const auto& p : probes) t1 << ',' << fixed(p.eta_primary);
  t1 << "\nsecondary";
  for (const auto& p : probes) t1 << ',' << fixed(p.eta_secondary);
  t1 << '\n';
  write_file(run_dir + "/report/table1.csv", t1.str());

  // Grid points on a 1.5 m x 1 m lattice, first subband.
  std::vector<Precoder> heat;
  std::vector<std::string> labels;
  auto on_lattice = [](double offset, double step) {
    const double k = offset / step;
    return std::abs(k - std::round(k)) < 1e-6;
  };
  for (const auto& r : dt.records) {
    const double dx = r.position.x() - dt.records.front().position.x();
    const double dy = r.position.y() - dt.records.front().position.y();
    if (!on_lattice(dx, 1.5) || !on_lattice(dy, 1.0) || r.precoders.empty()) continue;
    heat.push_back(r.precoders.front());
    labels.push_back("p" + std::to_string(r.position_id));
  }
  std::ostringstream hm;
  write_matrix_csv(hm, similarity_heatmap(heat), labels);
  write_file(run_dir + "/report/fig3_heatmap.csv", hm.str());

  for (const char* f : {"table2.csv", "table3.csv"}) {
    write_file(run_dir + "/report/" + f, read_text_file(run_dir + "/eval/" + f));
  }
}

}  // namespace csidt
