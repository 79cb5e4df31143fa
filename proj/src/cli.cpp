#include "bridgecat/cli.hpp"

#include "bridgecat/elements.hpp"
#include "bridgecat/io.hpp"
#include "bridgecat/outlier.hpp"
#include "bridgecat/parallel.hpp"
#include "bridgecat/screening.hpp"
#include "bridgecat/trainer.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

namespace bridgecat {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

void log_run(const std::string& command, const json& config) {
  fmt::print(stderr, "[bridgecat] {} config: {}\n", command, config.dump());
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream is(csv);
  while (std::getline(is, token, ',')) {
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

std::vector<std::string> composition_symbols(const std::string& composition) {
  std::vector<std::string> symbols;
  for (char c : composition) {
    if (std::isupper(static_cast<unsigned char>(c))) {
      symbols.emplace_back(1, c);
    } else if (std::islower(static_cast<unsigned char>(c)) && !symbols.empty()) {
      symbols.back() += c;
    } else {
      throw std::invalid_argument("bad composition string: " + composition);
    }
  }
  if (symbols.empty()) throw std::invalid_argument("empty composition string");
  return symbols;
}

AdsorbateTemplate resolve_adsorbate(const std::string& spec) {
  if (spec == "O" || spec == "OH" || spec == "H") return adsorbate_template(spec);
  // Template file: anchor atom first, molecular axis along +z.
  Structure s = read_structure(spec);
  AdsorbateTemplate tpl;
  tpl.name = fs::path(spec).stem().string();
  tpl.atomic_numbers = s.atomic_numbers;
  tpl.positions = s.positions;
  tpl.positions.rowwise() -= s.positions.row(0);
  return tpl;
}

Checkpoint make_denoiser_checkpoint(const RunConfig& config, const TrainResult& result) {
  Checkpoint ckpt;
  ckpt.kind = "denoiser";
  ckpt.config = config.model;
  ckpt.schedule_T = config.num_timesteps;
  ckpt.schedule_mode = config.mt_mode;
  ckpt.schedule_s = 2.0 * config.max_var;
  ckpt.params = result.params;
  ckpt.adam_m = result.opt.m;
  ckpt.adam_v = result.opt.v;
  ckpt.opt_step = result.opt.step;
  ckpt.epoch = result.epochs_done;
  ckpt.rng_state = result.rng.serialize();
  ckpt.history = result.epoch_loss;
  return ckpt;
}

int cmd_dataset_make(const std::string& out_dir, const std::string& compositions,
                     const std::string& facets, int nx, int ny, int layers, double vacuum,
                     const std::string& adsorbates, double height, double jitter,
                     double lattice_constant, std::uint64_t seed) {
  log_run("dataset make",
          json{{"out", out_dir}, {"compositions", compositions}, {"facets", facets},
               {"size", {nx, ny, layers}}, {"vacuum", vacuum}, {"adsorbates", adsorbates},
               {"height", height}, {"jitter", jitter}, {"seed", seed}});
  fs::create_directories(fs::path(out_dir) / "surfaces");
  fs::create_directories(fs::path(out_dir) / "structures");

  std::vector<Structure> slabs;
  std::vector<ManifestRecord> surface_records;
  for (const std::string& composition : split_list(compositions)) {
    std::vector<std::string> species = composition_symbols(composition);
    double a = lattice_constant;
    if (a <= 0.0) {
      double sum = 0.0;
      for (const auto& s : species) {
        auto tab = fcc_lattice_constant(s);
        if (!tab.has_value()) {
          throw std::invalid_argument("no tabulated fcc lattice constant for " + s +
                                      "; pass --lattice-constant");
        }
        sum += *tab;
      }
      a = sum / static_cast<double>(species.size());
    }
    for (const std::string& facet : split_list(facets)) {
      SlabSpec spec;
      spec.lattice_constant = a;
      spec.facet = facet_from_string(facet);
      spec.nx = nx;
      spec.ny = ny;
      spec.layers = layers;
      spec.vacuum = vacuum;
      spec.species = species;
      spec.id = composition + "_" + to_string(spec.facet);
      Structure slab = build_slab(spec);
      std::string path = (fs::path(out_dir) / "surfaces" / (spec.id + ".xyz")).string();
      write_structure(slab, path);
      surface_records.push_back(ManifestRecord{spec.id, fs::absolute(path).string(), "",
                                               "", to_string(spec.facet), {}});
      slabs.push_back(std::move(slab));
    }
  }
  write_manifest(surface_records, (fs::path(out_dir) / "surfaces.jsonl").string());

  std::vector<AdsorbateTemplate> templates;
  for (const std::string& name : split_list(adsorbates)) {
    templates.push_back(resolve_adsorbate(name));
  }
  SurrogateOracle oracle;
  DatasetOptions options;
  options.height = height;
  options.jitter = jitter;
  std::vector<StructurePair> pairs = make_synthetic_dataset(slabs, templates, oracle, seed, options);

  std::vector<ManifestRecord> records;
  for (const StructurePair& pair : pairs) {
    std::string base = (fs::path(out_dir) / "structures" / pair.initial.id).string();
    write_structure(pair.initial, base + "_initial.xyz");
    write_structure(pair.relaxed, base + "_relaxed.xyz");
    records.push_back(ManifestRecord{pair.initial.id,
                                     fs::absolute(base + "_initial.xyz").string(),
                                     fs::absolute(base + "_relaxed.xyz").string(),
                                     pair.adsorbate_species, pair.facet, {}});
  }
  write_manifest(records, (fs::path(out_dir) / "pairs.jsonl").string());
  fmt::print("wrote {} surfaces and {} pairs under {}\n", surface_records.size(),
             records.size(), out_dir);
  return 0;
}

int cmd_dataset_clean(const std::string& manifest, const std::string& out, double min_dmae,
                      double max_dmae) {
  log_run("dataset clean", json{{"manifest", manifest}, {"out", out}, {"min_dmae", min_dmae},
                                {"max_dmae", max_dmae}});
  std::vector<ManifestRecord> records = read_manifest(manifest);
  std::vector<StructurePair> pairs = load_pairs(manifest);
  std::map<std::string, const StructurePair*> by_id;
  for (const auto& pair : pairs) by_id[pair.initial.id] = &pair;

  std::vector<ManifestRecord> kept;
  for (auto& record : records) {
    auto it = by_id.find(record.id);
    if (it == by_id.end()) continue;
    double d = dmae(it->second->initial, it->second->relaxed);
    if (d >= min_dmae && d <= max_dmae) {
      ManifestRecord resolved = record;
      fs::path base = fs::path(manifest).parent_path();
      if (!fs::path(resolved.initial_path).is_absolute()) {
        resolved.initial_path = fs::absolute(base / resolved.initial_path).string();
      }
      if (!resolved.relaxed_path.empty() && !fs::path(resolved.relaxed_path).is_absolute()) {
        resolved.relaxed_path = fs::absolute(base / resolved.relaxed_path).string();
      }
      kept.push_back(std::move(resolved));
    }
  }
  if (kept.empty()) fmt::print(stderr, "warning: cleaning removed every pair\n");
  write_manifest(kept, out);
  fmt::print("kept {} of {} pairs\n", kept.size(), records.size());
  return 0;
}

int cmd_dataset_split(const std::string& manifest, const std::string& out_train,
                      const std::string& out_test, double ratio, std::uint64_t seed) {
  log_run("dataset split", json{{"manifest", manifest}, {"ratio", ratio}, {"seed", seed}});
  std::vector<ManifestRecord> records = read_manifest(manifest);
  if (records.size() < 2) throw std::runtime_error("split requires at least two records");
  fs::path base = fs::path(manifest).parent_path();
  for (auto& record : records) {
    if (!fs::path(record.initial_path).is_absolute()) {
      record.initial_path = fs::absolute(base / record.initial_path).string();
    }
    if (!record.relaxed_path.empty() && !fs::path(record.relaxed_path).is_absolute()) {
      record.relaxed_path = fs::absolute(base / record.relaxed_path).string();
    }
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  auto [n_train, n_test] = split_sizes(records.size(), ratio);
  (void)n_test;
  std::vector<ManifestRecord> train_records, test_records;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? train_records : test_records).push_back(records[order[k]]);
  }
  write_manifest(train_records, out_train);
  write_manifest(test_records, out_test);
  fmt::print("split {} records into {}/{}\n", records.size(), train_records.size(),
             test_records.size());
  return 0;
}

int cmd_train(const std::string& manifest, const std::string& config_path,
              const std::string& out, const std::string& resume, int epochs_override,
              std::int64_t seed_override, int jobs, int log_every) {
  RunConfig config = config_path.empty() ? RunConfig{} : read_run_config(config_path);
  if (epochs_override >= 0) config.train.epochs = epochs_override;
  if (seed_override >= 0) {
    config.train.seed = static_cast<std::uint64_t>(seed_override);
  }
  config.train.jobs = jobs;
  log_run("train", json{{"manifest", manifest}, {"config", config_path}, {"out", out},
                        {"resume", resume}, {"epochs", config.train.epochs},
                        {"seed", config.train.seed}, {"jobs", jobs},
                        {"hidden", config.model.hidden}, {"layers", config.model.layers},
                        {"lr", config.train.learning_rate},
                        {"T", config.num_timesteps}, {"max_var", config.max_var}});

  std::vector<StructurePair> pairs = load_pairs(manifest);
  if (pairs.empty()) throw std::runtime_error("no training pairs in manifest");
  BridgeSchedule schedule = config.schedule();

  TrainResult resume_state;
  const TrainResult* resume_ptr = nullptr;
  if (!resume.empty()) {
    Checkpoint ckpt = load_checkpoint(resume);
    if (ckpt.kind != "denoiser") throw std::runtime_error("resume checkpoint is not a denoiser");
    config.model = ckpt.config;
    config.num_timesteps = ckpt.schedule_T;
    config.mt_mode = ckpt.schedule_mode;
    config.max_var = 0.5 * ckpt.schedule_s;
    schedule = ckpt.schedule();
    resume_state.params = ckpt.params;
    resume_state.opt = AdamState::like(ckpt.params);
    resume_state.opt.m = ckpt.adam_m;
    resume_state.opt.v = ckpt.adam_v;
    resume_state.opt.step = ckpt.opt_step;
    resume_state.rng = Rng::deserialize(ckpt.rng_state);
    resume_state.epochs_done = ckpt.epoch;
    resume_state.epoch_loss = ckpt.history;
    resume_ptr = &resume_state;
  }

  TrainResult result = train(pairs, config.model, schedule, config.train, resume_ptr,
                             [&](int epoch, double loss) {
                               if (log_every > 0 && (epoch % log_every == 0)) {
                                 fmt::print(stderr, "epoch {:5d} loss {:.6f}\n", epoch, loss);
                               }
                             });
  save_checkpoint(make_denoiser_checkpoint(config, result), out);
  fmt::print("trained {} epochs; final loss {:.6f}; saved {}\n", result.epochs_done,
             result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back(), out);
  return 0;
}

SamplerConfig sampler_from_flags(int steps, double eta, std::uint64_t seed,
                                 const std::string& step_selection) {
  SamplerConfig sampler;
  sampler.sample_steps = steps;
  sampler.eta = eta;
  sampler.seed = seed;
  sampler.step_selection = step_selection_from_string(step_selection);
  return sampler;
}

int cmd_generate(const std::string& in, const std::string& ckpt_path, const std::string& out,
                 int steps, double eta, std::uint64_t seed, const std::string& selection,
                 double max_var_override) {
  log_run("generate", json{{"in", in}, {"ckpt", ckpt_path}, {"out", out}, {"steps", steps},
                           {"eta", eta}, {"seed", seed}, {"schedule", selection},
                           {"max_var", max_var_override}});
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.kind != "denoiser") throw std::runtime_error("checkpoint is not a denoiser");
  if (max_var_override > 0.0) ckpt.schedule_s = 2.0 * max_var_override;
  BridgeSchedule schedule = ckpt.schedule();
  Structure initial = read_structure(in);
  SamplerConfig sampler = sampler_from_flags(steps, eta, seed, selection);
  DenoiserFn denoiser = make_denoiser_fn(ckpt.params, ckpt.config, schedule);
  Structure generated = generate(initial, denoiser, schedule, sampler);
  write_structure(generated, out);
  fmt::print("generated {} -> {}\n", in, out);
  return 0;
}

int cmd_eval(const std::string& manifest, const std::string& ckpt_path, const std::string& out,
             const std::string& summary, int steps, double eta, std::uint64_t seed,
             const std::string& selection, int jobs) {
  log_run("eval", json{{"manifest", manifest}, {"ckpt", ckpt_path}, {"out", out},
                       {"summary", summary}, {"steps", steps}, {"eta", eta}, {"seed", seed},
                       {"jobs", jobs}});
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.kind != "denoiser") throw std::runtime_error("checkpoint is not a denoiser");
  BridgeSchedule schedule = ckpt.schedule();
  DenoiserFn denoiser = make_denoiser_fn(ckpt.params, ckpt.config, schedule);
  std::vector<StructurePair> pairs = load_pairs(manifest);
  if (pairs.empty()) throw std::runtime_error("no evaluation pairs in manifest");

  EvalReport report;
  report.entries.resize(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), jobs, [&](int k) {
    const StructurePair& pair = pairs[static_cast<std::size_t>(k)];
    SamplerConfig sampler = sampler_from_flags(steps, eta,
                                               mix_seed(seed, static_cast<std::uint64_t>(k)),
                                               selection);
    Structure generated = generate(pair.initial, denoiser, schedule, sampler);
    report.entries[static_cast<std::size_t>(k)] =
        EvalEntry{pair.initial.id, dmae(generated, pair.relaxed), pair.adsorbate_species};
  });
  write_eval_csv(report, out);
  if (!summary.empty()) write_eval_summary_json(report, summary);
  fmt::print("evaluated {} pairs; mean DMAE {:.4f} A\n", report.entries.size(),
             report.mean_dmae());
  return 0;
}

int cmd_outlier_label(const std::string& manifest, const std::string& ckpt_path,
                      const std::string& out, const std::string& structures_dir,
                      const std::string& coefficients, double dmae_threshold, int steps,
                      std::uint64_t seed, int jobs) {
  log_run("outlier label",
          json{{"manifest", manifest}, {"ckpt", ckpt_path}, {"out", out},
               {"structures_dir", structures_dir}, {"coefficients", coefficients},
               {"dmae_threshold", dmae_threshold}, {"seed", seed}, {"jobs", jobs}});
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.kind != "denoiser") throw std::runtime_error("checkpoint is not a denoiser");
  BridgeSchedule schedule = ckpt.schedule();
  DenoiserFn denoiser = make_denoiser_fn(ckpt.params, ckpt.config, schedule);
  std::vector<StructurePair> pairs = load_pairs(manifest);

  std::vector<double> coeffs;
  for (const std::string& c : split_list(coefficients)) coeffs.push_back(std::stod(c));
  SamplerConfig sampler;
  sampler.sample_steps = steps;
  sampler.seed = seed;
  std::vector<LabeledStructure> labeled =
      label_generations(denoiser, schedule, sampler, pairs, coeffs, dmae_threshold, {}, jobs);

  std::vector<OutlierLabel> labels;
  labels.reserve(labeled.size());
  for (const auto& item : labeled) labels.push_back(item.label);
  write_labels_jsonl(labels, out);

  if (!structures_dir.empty()) {
    fs::create_directories(structures_dir);
    std::vector<ManifestRecord> records;
    for (const auto& item : labeled) {
      std::string path = (fs::path(structures_dir) / (item.label.id + ".xyz")).string();
      write_structure(item.structure, path);
      records.push_back(ManifestRecord{item.label.id, fs::absolute(path).string(), "", "", "", {}});
    }
    write_manifest(records, (fs::path(structures_dir) / "generated.jsonl").string());
  }
  std::size_t outliers = 0;
  for (const auto& label : labels) outliers += label.is_outlier ? 1 : 0;
  fmt::print("labeled {} generations ({} outliers)\n", labels.size(), outliers);
  return 0;
}

int cmd_outlier_train(const std::string& labels_path, const std::string& structures_manifest,
                      const std::string& out, int epochs, int batch, double lr,
                      std::uint64_t seed, int jobs, int hidden, int layers) {
  log_run("outlier train",
          json{{"labels", labels_path}, {"structures", structures_manifest}, {"out", out},
               {"epochs", epochs}, {"batch", batch}, {"lr", lr}, {"seed", seed},
               {"jobs", jobs}});
  std::vector<OutlierLabel> labels = read_labels_jsonl(labels_path);
  std::map<std::string, const OutlierLabel*> by_id;
  for (const auto& label : labels) by_id[label.id] = &label;

  std::vector<LabeledStructure> data;
  for (const Structure& s : load_initial_structures(structures_manifest)) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) {
      throw std::runtime_error("structure id missing from labels: " + s.id);
    }
    data.push_back(LabeledStructure{s, *it->second});
  }

  DenoiserConfig config;
  config.hidden = hidden;
  config.layers = layers;
  config.out_channels = 1;
  ClassifierTrainConfig train_config;
  train_config.epochs = epochs;
  train_config.batch_size = batch;
  train_config.learning_rate = lr;
  train_config.seed = seed;
  train_config.jobs = jobs;
  ClassifierTrainResult result = train_classifier(data, config, train_config);

  Checkpoint ckpt;
  ckpt.kind = "classifier";
  ckpt.config = result.config;
  ckpt.params = result.params;
  ckpt.history = result.epoch_loss;
  ckpt.rng_state = Rng(seed).serialize();
  save_checkpoint(ckpt, out);
  fmt::print("classifier: train acc {:.3f}, test acc {:.3f}, test AUC {:.3f}; saved {}\n",
             result.train_accuracy, result.test_accuracy, result.test_auc, out);
  return 0;
}

int cmd_outlier_detect(const std::string& in, const std::string& classifier_path,
                       const std::string& reference, const std::string& out,
                       double threshold) {
  log_run("outlier detect", json{{"in", in}, {"classifier", classifier_path},
                                 {"reference", reference}, {"threshold", threshold}});
  Checkpoint ckpt = load_checkpoint(classifier_path);
  if (ckpt.kind != "classifier") throw std::runtime_error("checkpoint is not a classifier");
  Structure structure = read_structure(in);
  Structure ref = read_structure(reference);
  DetectResult result = detect(structure, ckpt.params, ckpt.config, threshold, ref);

  json j;
  j["id"] = structure.id;
  j["is_outlier"] = result.is_outlier;
  j["confidence"] = result.confidence;
  j["flags"] = {{"collision", result.report.collision},
                {"dissociation", result.report.dissociation},
                {"desorption", result.report.desorption},
                {"reconstruction", result.report.reconstruction}};
  if (!out.empty()) {
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open report for writing: " + out);
    os << j.dump(2) << "\n";
  }
  fmt::print("{}\n", j.dump());
  return 0;
}

int cmd_screen(const std::string& surfaces_manifest, const std::string& adsorbate,
               const std::string& ckpt_path, const std::string& classifier_path,
               const std::string& reference, const std::string& window_text,
               const std::string& out, const std::string& sites_dir, int steps,
               std::uint64_t seed, int jobs, double threshold) {
  log_run("screen", json{{"surfaces", surfaces_manifest}, {"adsorbate", adsorbate},
                         {"ckpt", ckpt_path}, {"classifier", classifier_path},
                         {"reference", reference}, {"window", window_text}, {"out", out},
                         {"seed", seed}, {"jobs", jobs}});
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.kind != "denoiser") throw std::runtime_error("checkpoint is not a denoiser");
  BridgeSchedule schedule = ckpt.schedule();
  DenoiserFn denoiser = make_denoiser_fn(ckpt.params, ckpt.config, schedule);

  std::vector<Structure> surfaces = load_initial_structures(surfaces_manifest);
  AdsorbateTemplate tpl = resolve_adsorbate(adsorbate);

  std::vector<std::string> bounds = split_list(window_text);
  if (bounds.size() != 2) throw std::runtime_error("--window needs 'lo,hi'");
  ScreenOptions options;
  options.window = {std::stod(bounds[0]), std::stod(bounds[1])};
  options.jobs = jobs;

  TriageFn triage;
  HeuristicOptions heuristics;
  if (!classifier_path.empty()) {
    Checkpoint cls = load_checkpoint(classifier_path);
    if (cls.kind != "classifier") throw std::runtime_error("checkpoint is not a classifier");
    triage = [cls, threshold, heuristics](const Structure& generated, const Structure& initial) {
      return detect(generated, cls.params, cls.config, threshold, initial, heuristics)
          .is_outlier;
    };
  } else {
    triage = [heuristics](const Structure& generated, const Structure& initial) {
      return run_heuristics(generated, initial, heuristics).any();
    };
  }

  SurrogateOracle oracle;
  SamplerConfig sampler;
  sampler.sample_steps = steps;
  sampler.seed = seed;
  ScreenResult result =
      screen(surfaces, reference, tpl, denoiser, schedule, sampler, oracle, triage, options);
  write_candidates_csv(result.candidates, out);

  if (!sites_dir.empty()) {
    fs::create_directories(sites_dir);
    for (const Structure& slab : surfaces) {
      Structure relaxed = oracle_relax(slab, oracle, options.relax).structure;
      int idx = 0;
      for (const AdsorptionSite& site : enumerate_sites(relaxed)) {
        Structure placed = place_adsorbate(relaxed, site, tpl, options.height);
        placed.id = slab.id + "_" + to_string(site.kind) + std::to_string(idx++);
        write_structure(placed,
                        (fs::path(sites_dir) / (placed.id + ".xyz")).string());
      }
    }
  }
  fmt::print("screened {} surfaces; {} candidates in window ({}, {}) eV; reference {} at {:.4f} eV\n",
             surfaces.size(), result.candidates.size(), options.window.first,
             options.window.second, reference, result.reference_energy);
  return 0;
}

} // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Periodic Brownian-bridge generator for adsorbate relaxation"};
  app.require_subcommand(1);
  int exit_code = 0;

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Synthetic dataset tooling");
  dataset->require_subcommand(1);
  {
    auto* make = dataset->add_subcommand("make", "Build slabs and oracle-relaxed pairs");
    auto opts = std::make_shared<std::tuple<std::string, std::string, std::string, int, int, int,
                                            double, std::string, double, double, double,
                                            std::uint64_t>>();
    auto& [out, comps, facets, nx, ny, layers, vacuum, ads, height, jitter, alat, seed] = *opts;
    out = "dataset";
    comps = "Pt,Pd,Ni,PtAu,PdAg";
    facets = "111,100";
    nx = 2; ny = 2; layers = 3; vacuum = 10.0;
    ads = "O,OH";
    height = 1.5; jitter = 0.0; alat = 0.0; seed = 0;
    make->add_option("--out", out, "Output directory");
    make->add_option("--compositions", comps, "Comma-separated compositions, e.g. Pt,PtAu");
    make->add_option("--facets", facets, "Comma-separated facets: 111,100");
    make->add_option("--nx", nx, "Surface repetitions along x");
    make->add_option("--ny", ny, "Surface repetitions along y");
    make->add_option("--layers", layers, "Slab layers");
    make->add_option("--vacuum", vacuum, "Vacuum spacing (A)");
    make->add_option("--adsorbates", ads, "Comma-separated adsorbates (O,OH,H)");
    make->add_option("--height", height, "Placement height above the site (A)");
    make->add_option("--jitter", jitter, "In-plane Gaussian jitter of the adsorbate (A)");
    make->add_option("--lattice-constant", alat, "Override fcc lattice constant (A)");
    make->add_option("--seed", seed, "RNG seed");
    make->callback([opts, &exit_code] {
      auto& [out, comps, facets, nx, ny, layers, vacuum, ads, height, jitter, alat, seed] = *opts;
      exit_code = cmd_dataset_make(out, comps, facets, nx, ny, layers, vacuum, ads, height,
                                   jitter, alat, seed);
    });
  }
  {
    auto* clean = dataset->add_subcommand("clean", "Drop unmoved or runaway pairs");
    auto opts = std::make_shared<std::tuple<std::string, std::string, double, double>>();
    auto& [manifest, out, min_dmae, max_dmae] = *opts;
    min_dmae = 1e-3; max_dmae = 0.5;
    clean->add_option("--manifest", manifest, "Input pairs manifest")->required();
    clean->add_option("--out", out, "Output manifest")->required();
    clean->add_option("--min-dmae", min_dmae, "Minimum DMAE (A)");
    clean->add_option("--max-dmae", max_dmae, "Maximum DMAE (A)");
    clean->callback([opts, &exit_code] {
      auto& [manifest, out, min_dmae, max_dmae] = *opts;
      exit_code = cmd_dataset_clean(manifest, out, min_dmae, max_dmae);
    });
  }
  {
    auto* split = dataset->add_subcommand("split", "Deterministic train/test split");
    auto opts = std::make_shared<std::tuple<std::string, std::string, std::string, double,
                                            std::uint64_t>>();
    auto& [manifest, out_train, out_test, ratio, seed] = *opts;
    ratio = 0.8; seed = 0;
    split->add_option("--manifest", manifest, "Input manifest")->required();
    split->add_option("--out-train", out_train, "Train manifest")->required();
    split->add_option("--out-test", out_test, "Test manifest")->required();
    split->add_option("--ratio", ratio, "Train fraction");
    split->add_option("--seed", seed, "RNG seed");
    split->callback([opts, &exit_code] {
      auto& [manifest, out_train, out_test, ratio, seed] = *opts;
      exit_code = cmd_dataset_split(manifest, out_train, out_test, ratio, seed);
    });
  }

  // train
  {
    auto* train_cmd = app.add_subcommand("train", "Train the denoiser");
    auto opts = std::make_shared<std::tuple<std::string, std::string, std::string, std::string,
                                            int, std::int64_t, int, int>>();
    auto& [manifest, config, out, resume, epochs, seed, jobs, log_every] = *opts;
    out = "model.ckpt";
    epochs = -1; seed = -1; jobs = default_jobs(); log_every = 10;
    train_cmd->add_option("--manifest", manifest, "Training pairs manifest")->required();
    train_cmd->add_option("--config", config, "key = value config file");
    train_cmd->add_option("--out", out, "Checkpoint path");
    train_cmd->add_option("--resume", resume, "Resume from checkpoint");
    train_cmd->add_option("--epochs", epochs, "Override epoch count");
    train_cmd->add_option("--seed", seed, "Override seed");
    train_cmd->add_option("--jobs", jobs, "Worker threads");
    train_cmd->add_option("--log-every", log_every, "Epoch logging stride");
    train_cmd->callback([opts, &exit_code] {
      auto& [manifest, config, out, resume, epochs, seed, jobs, log_every] = *opts;
      exit_code = cmd_train(manifest, config, out, resume, epochs, seed, jobs, log_every);
    });
  }

  // generate
  {
    auto* gen = app.add_subcommand("generate", "Generate a relaxed structure");
    auto opts = std::make_shared<std::tuple<std::string, std::string, std::string, int, double,
                                            std::uint64_t, std::string, double>>();
    auto& [in, ckpt, out, steps, eta, seed, selection, max_var] = *opts;
    steps = 20; eta = 0.0; seed = 0; selection = "linear"; max_var = 0.0;
    gen->add_option("--in", in, "Initial structure (xyz)")->required();
    gen->add_option("--ckpt", ckpt, "Denoiser checkpoint")->required();
    gen->add_option("--out", out, "Output structure (xyz)")->required();
    gen->add_option("--steps", steps, "Sampling steps");
    gen->add_option("--eta", eta, "Noise multiplier (0 = ODE)");
    gen->add_option("--seed", seed, "RNG seed");
    gen->add_option("--schedule", selection, "Timestep selection: linear|cosine");
    gen->add_option("--max-var", max_var, "Override schedule max variance");
    gen->callback([opts, &exit_code] {
      auto& [in, ckpt, out, steps, eta, seed, selection, max_var] = *opts;
      exit_code = cmd_generate(in, ckpt, out, steps, eta, seed, selection, max_var);
    });
  }

  // eval
  {
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate DMAE over a test manifest");
    auto opts = std::make_shared<std::tuple<std::string, std::string, std::string, std::string,
                                            int, double, std::uint64_t, std::string, int>>();
    auto& [manifest, ckpt, out, summary, steps, eta, seed, selection, jobs] = *opts;
    out = "eval.csv"; steps = 20; eta = 0.0; seed = 0; selection = "linear";
    jobs = default_jobs();
    eval_cmd->add_option("--manifest", manifest, "Pairs manifest")->required();
    eval_cmd->add_option("--ckpt", ckpt, "Denoiser checkpoint")->required();
    eval_cmd->add_option("--out", out, "CSV output");
    eval_cmd->add_option("--summary", summary, "JSON summary output");
    eval_cmd->add_option("--steps", steps, "Sampling steps");
    eval_cmd->add_option("--eta", eta, "Noise multiplier");
    eval_cmd->add_option("--seed", seed, "RNG seed");
    eval_cmd->add_option("--schedule", selection, "Timestep selection: linear|cosine");
    eval_cmd->add_option("--jobs", jobs, "Worker threads");
    eval_cmd->callback([opts, &exit_code] {
      auto& [manifest, ckpt, out, summary, steps, eta, seed, selection, jobs] = *opts;
      exit_code = cmd_eval(manifest, ckpt, out, summary, steps, eta, seed, selection, jobs);
    });
  }

  // outlier
  auto* outlier = app.add_subcommand("outlier", "Outlier labeling, training, detection");
  outlier->require_subcommand(1);
  {
    auto* label = outlier->add_subcommand("label", "Label generations for classifier training");
    auto opts = std::make_shared<std::tuple<std::string, std::string, std::string, std::string,
                                            std::string, double, int, std::uint64_t, int>>();
    auto& [manifest, ckpt, out, dir, coeffs, thr, steps, seed, jobs] = *opts;
    out = "labels.jsonl"; coeffs = "0,0.5,1"; thr = 0.05; steps = 20; seed = 0;
    jobs = default_jobs();
    label->add_option("--manifest", manifest, "Pairs manifest")->required();
    label->add_option("--ckpt", ckpt, "Denoiser checkpoint")->required();
    label->add_option("--out", out, "Labels JSON-lines output");
    label->add_option("--structures-dir", dir, "Directory for generated structures");
    label->add_option("--coefficients", coeffs, "Noise coefficients");
    label->add_option("--dmae-threshold", thr, "Outlier DMAE threshold (A)");
    label->add_option("--steps", steps, "Sampling steps");
    label->add_option("--seed", seed, "RNG seed");
    label->add_option("--jobs", jobs, "Worker threads");
    label->callback([opts, &exit_code] {
      auto& [manifest, ckpt, out, dir, coeffs, thr, steps, seed, jobs] = *opts;
      exit_code = cmd_outlier_label(manifest, ckpt, out, dir, coeffs, thr, steps, seed, jobs);
    });
  }
  {
    auto* train_cls = outlier->add_subcommand("train", "Train the confidence classifier");
    auto opts = std::make_shared<std::tuple<std::string, std::string, std::string, int, int,
                                            double, std::uint64_t, int, int, int>>();
    auto& [labels, structures, out, epochs, batch, lr, seed, jobs, hidden, layers] = *opts;
    out = "classifier.ckpt"; epochs = 20; batch = 256; lr = 1e-3; seed = 0;
    jobs = default_jobs(); hidden = 64; layers = 3;
    train_cls->add_option("--labels", labels, "Labels JSON-lines")->required();
    train_cls->add_option("--structures", structures, "Generated-structures manifest")->required();
    train_cls->add_option("--out", out, "Classifier checkpoint");
    train_cls->add_option("--epochs", epochs, "Training epochs");
    train_cls->add_option("--batch", batch, "Batch size");
    train_cls->add_option("--lr", lr, "Learning rate (constant)");
    train_cls->add_option("--seed", seed, "RNG seed");
    train_cls->add_option("--jobs", jobs, "Worker threads");
    train_cls->add_option("--hidden", hidden, "Hidden channels");
    train_cls->add_option("--layers", layers, "Interaction blocks");
    train_cls->callback([opts, &exit_code] {
      auto& [labels, structures, out, epochs, batch, lr, seed, jobs, hidden, layers] = *opts;
      exit_code = cmd_outlier_train(labels, structures, out, epochs, batch, lr, seed, jobs,
                                    hidden, layers);
    });
  }
  {
    auto* detect_cmd = outlier->add_subcommand("detect", "Detect outliers in a structure");
    auto opts = std::make_shared<std::tuple<std::string, std::string, std::string, std::string,
                                            double>>();
    auto& [in, classifier, reference, out, threshold] = *opts;
    threshold = 0.5;
    detect_cmd->add_option("--in", in, "Structure to check")->required();
    detect_cmd->add_option("--classifier", classifier, "Classifier checkpoint")->required();
    detect_cmd->add_option("--reference", reference, "Reference initial structure")->required();
    detect_cmd->add_option("--out", out, "JSON report path");
    detect_cmd->add_option("--threshold", threshold, "Confidence threshold");
    detect_cmd->callback([opts, &exit_code] {
      auto& [in, classifier, reference, out, threshold] = *opts;
      exit_code = cmd_outlier_detect(in, classifier, reference, out, threshold);
    });
  }

  // screen
  {
    auto* screen_cmd = app.add_subcommand("screen", "Energy-window candidate screening");
    auto opts = std::make_shared<std::tuple<std::string, std::string, std::string, std::string,
                                            std::string, std::string, std::string, std::string,
                                            int, std::uint64_t, int, double>>();
    auto& [surfaces, adsorbate, ckpt, classifier, reference, window, out, sites_dir, steps,
           seed, jobs, threshold] = *opts;
    adsorbate = "OH"; window = "-0.2,0.4"; out = "candidates.csv"; steps = 20; seed = 0;
    jobs = default_jobs(); threshold = 0.5;
    screen_cmd->add_option("--surfaces", surfaces, "Surfaces manifest")->required();
    screen_cmd->add_option("--adsorbate", adsorbate, "O|OH|H or a template file");
    screen_cmd->add_option("--ckpt", ckpt, "Denoiser checkpoint")->required();
    screen_cmd->add_option("--classifier", classifier, "Optional classifier checkpoint");
    screen_cmd->add_option("--reference", reference, "Reference surface id")->required();
    screen_cmd->add_option("--window", window, "Energy window lo,hi (eV)");
    screen_cmd->add_option("--out", out, "Candidates CSV");
    screen_cmd->add_option("--sites-dir", sites_dir, "Dump placed site structures here");
    screen_cmd->add_option("--steps", steps, "Sampling steps");
    screen_cmd->add_option("--seed", seed, "RNG seed");
    screen_cmd->add_option("--jobs", jobs, "Worker threads");
    screen_cmd->add_option("--threshold", threshold, "Classifier confidence threshold");
    screen_cmd->callback([opts, &exit_code] {
      auto& [surfaces, adsorbate, ckpt, classifier, reference, window, out, sites_dir, steps,
             seed, jobs, threshold] = *opts;
      exit_code = cmd_screen(surfaces, adsorbate, ckpt, classifier, reference, window, out,
                             sites_dir, steps, seed, jobs, threshold);
    });
  }

  // version
  app.add_subcommand("version", "Print the version")->callback([] {
    fmt::print("bridgecat {}\n", kVersion);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return exit_code;
}

} // namespace bridgecat
