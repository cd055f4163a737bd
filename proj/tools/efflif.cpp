// efflif: train, evaluate and analyse shared-membrane LIF networks.
//
// Exit codes: 0 ok, 1 configuration error, 2 data error, 3 numeric failure
// (divergence, failed gradient check or memory verification).

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "efflif/efflif.hpp"

namespace {

using namespace efflif;

struct common_opts {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct spec_opts {
  std::string path;
  std::string scheme;
  std::size_t groups = 1;
  std::size_t timesteps = 0;
  std::string reset;
};

void add_spec_options(CLI::App* app, spec_opts& s, bool required = true) {
  auto* o = app->add_option("--spec", s.path, "network spec file");
  if (required) o->required();
  app->add_option("--scheme", s.scheme, "override sharing: baseline | layer | channel | layer-channel");
  app->add_option("--groups", s.groups, "channel groups n for channel schemes")->check(CLI::PositiveNumber);
  app->add_option("--timesteps", s.timesteps, "override timesteps T")->check(CLI::PositiveNumber);
  app->add_option("--reset", s.reset, "override reset mode: soft | hard");
}

network_spec resolve_spec(const spec_opts& s) {
  auto spec = load_network_spec(s.path);
  if (!s.scheme.empty()) spec = with_scheme(spec, {parse_scheme_kind(s.scheme), s.groups});
  if (s.timesteps) spec.timesteps = s.timesteps;
  if (!s.reset.empty()) spec.lif.reset = parse_reset_mode(s.reset);
  validate(spec);
  return spec;
}

void echo_spec(const network_spec& spec) {
  std::cerr << "# resolved network (hash " << std::hex << spec_hash(spec) << std::dec << ")\n";
  std::istringstream in(write_network_spec(spec));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) std::cerr << "#   " << line << "\n";
}

void add_common(CLI::App* app, common_opts& c) {
  app->add_option("--seed", c.seed, "64-bit seed for all randomness");
  app->add_option("--threads", c.threads, "worker thread cap")->check(CLI::PositiveNumber);
}

// Every long option can also be set as EFFLIF_<NAME>.
void bind_env(CLI::App* app) {
  for (auto* opt : app->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    std::string env = "EFFLIF_";
    for (char ch : opt->get_lnames().front())
      env += ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    opt->envname(env);
  }
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

// --- train / eval ---------------------------------------------------------

struct train_opts {
  spec_opts spec;
  common_opts common;
  std::string data;
  train_config cfg;
  std::string backward = "cached";
  std::string out;
  std::string log;
  bool use_best = true;
};

int run_train(const train_opts& o) {
  const auto spec = resolve_spec(o.spec);
  echo_spec(spec);
  auto cfg = o.cfg;
  cfg.seed = o.common.seed;
  cfg.threads = o.common.threads;
  cfg.backward = parse_backward_mode(o.backward);
  cfg.validate();
  if (cfg.backward == backward_mode::recompute) check_reversible(spec.lif);
  const auto splits = load_splits(load_manifest(o.data));
  std::cerr << "# data train=" << splits.train.size() << " val=" << splits.val.size()
            << " test=" << splits.test.size() << "\n";

  std::ofstream log;
  if (!o.log.empty()) {
    log.open(o.log);
    if (!log) throw data_error("cannot write log '" + o.log + "'");
  }
  const auto res = train(spec, splits.train, cfg, &splits.val, [&](const epoch_metrics& m) {
    const auto rec = to_record(m);
    std::cout << rec << std::endl;
    if (log) log << rec << std::endl;
  });
  const model& chosen = o.use_best ? res.best_model : res.final_model;
  std::cout << "best_epoch=" << res.best_epoch << "\n";
  if (splits.test.size() > 0) {
    const auto ev = evaluate(chosen, spec, splits.test, cfg.threads);
    std::cout << "test_acc=" << fmt(ev.accuracy) << " test_loss=" << fmt(ev.loss)
              << " spike_rate=" << join(ev.spike_rates) << "\n";
  }
  if (!o.out.empty()) {
    save_checkpoint(o.out, spec, chosen);
    std::cerr << "# wrote " << o.out << "\n";
  }
  return 0;
}

struct eval_opts {
  spec_opts spec;
  common_opts common;
  std::string data;
  std::string checkpoint;
  std::string split = "test";
};

int run_eval(const eval_opts& o) {
  const auto spec = resolve_spec(o.spec);
  echo_spec(spec);
  const auto m = load_checkpoint(o.checkpoint, spec);
  const auto splits = load_splits(load_manifest(o.data));
  const sequence_dataset* ds = o.split == "train" ? &splits.train : o.split == "val" ? &splits.val : &splits.test;
  const auto ev = evaluate(m, spec, *ds, o.common.threads);
  std::cout << "split=" << o.split << "\nsamples=" << ev.samples << "\naccuracy=" << fmt(ev.accuracy)
            << "\nloss=" << fmt(ev.loss) << "\n";
  for (std::size_t l = 0; l < ev.spike_rates.size(); ++l)
    std::cout << "spike_rate." << l << "=" << fmt(ev.spike_rates[l]) << "\n";
  return 0;
}

// --- gradcheck ------------------------------------------------------------

struct gradcheck_opts {
  common_opts common;
  std::string scheme = "baseline";
  std::size_t groups = 1;
  gradcheck_options g;
  std::string backward = "cached";
  std::string reset = "soft";
  double tol = 1e-4;
};

int run_gradcheck_cmd(const gradcheck_opts& o) {
  auto g = o.g;
  g.scheme = {parse_scheme_kind(o.scheme), o.groups};
  g.seed = o.common.seed;
  g.backward = parse_backward_mode(o.backward);
  g.lif.reset = parse_reset_mode(o.reset);
  const auto r = run_gradcheck(g);
  std::cout << "scheme=" << label(g.scheme) << "\ncases=" << r.cases << "\nweights_checked=" << r.weights_checked
            << "\nmax_rel_error=" << std::scientific << std::setprecision(3) << r.max_rel_error << std::defaultfloat
            << "\nworst_seed=" << r.worst_seed << "\ntolerance=" << o.tol
            << "\nresult=" << (r.max_rel_error < o.tol ? "PASS" : "FAIL") << "\n";
  return r.max_rel_error < o.tol ? 0 : 3;
}

// --- memreport ------------------------------------------------------------

struct memreport_opts {
  spec_opts spec;
  common_opts common;
  std::string format = "table";
  bool verify = false;
  std::size_t bytes_per_membrane = 4;
};

// Runs the engine once in the reference backward mode and compares its
// instrumented membrane storage with the analytic report.
bool verify_report(const network_spec& spec, const mem_report& r, std::uint64_t seed, std::ostream& out,
                   const std::string& prefix) {
  const auto mode = r.mode == mem_mode::backward_recompute ? backward_mode::recompute : backward_mode::cached;
  network_engine<double> eng(spec, {fire_mode::spike, mode, false});
  const auto m = init_model(spec, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::vector<float> x(spec.input_channels * spec.input_length);
  for (auto& v : x) v = nd(rng);
  const auto logits = eng.forward(m, x);
  eng.backward(m, softmax_cross_entropy<double>(logits, 0).dlogits);
  const auto& c = eng.counters();
  const std::size_t bwd = mode == backward_mode::cached ? c.tape_membrane_elems : c.backward_membrane_elems;
  const bool ok = c.live_membrane_elems == r.lif_forward_elems && bwd == r.lif_backward_elems;
  out << prefix << "verify.forward_elems=" << c.live_membrane_elems << "\n"
      << prefix << "verify.backward_elems=" << bwd << "\n"
      << prefix << "verify=" << (ok ? "match" : "MISMATCH") << "\n";
  return ok;
}

int run_memreport(const memreport_opts& o) {
  const auto shared = resolve_spec(o.spec);
  const auto base = with_scheme(shared, {scheme_kind::baseline, 1});
  echo_spec(shared);
  const auto T = shared.timesteps;
  const auto rb = lif_bytes(base, T, reference_mode(base), o.bytes_per_membrane);
  const auto rs = lif_bytes(shared, T, reference_mode(shared), o.bytes_per_membrane);
  std::string shared_name = "shared";
  if (!shared.blocks.empty()) shared_name = label(shared.blocks.front().scheme);
  if (o.format == "kv") {
    std::cout << to_kv(rb, "baseline.") << to_kv(rs, "shared.");
    const auto e = efficiency_ratios(rb, rs);
    std::cout << "fwd_ratio=" << fmt(e.fwd_ratio, 10) << "\nbwd_ratio=" << fmt(e.bwd_ratio, 10) << "\n";
  } else {
    std::cout << "T=" << T << "\n" << to_table({{"Baseline", rb}, {shared_name, rs}});
    for (std::size_t i = 0; i < rs.blocks.size(); ++i) {
      const auto& b = rs.blocks[i];
      std::cout << "block " << i << ": layers " << b.block.first << "-" << b.block.last << ", "
                << label(b.block.scheme) << ", " << b.buffers << " buffer(s) of " << b.buffer_elems
                << ", reduction 1/" << fmt(b.reduction) << "\n";
    }
  }
  if (!o.verify) return 0;
  const bool ok = verify_report(base, rb, o.common.seed, std::cout, "baseline.") &
                  verify_report(shared, rs, o.common.seed, std::cout, "shared.");
  return ok ? 0 : 3;
}

// --- hwreport -------------------------------------------------------------

struct hwreport_opts {
  spec_opts spec;
  common_opts common;
  std::size_t n_pe = 128;
  std::size_t share_ratio = 0;
  std::vector<std::size_t> batches{1};
};

int run_hwreport(const hwreport_opts& o) {
  const auto shared = resolve_spec(o.spec);
  const auto base = with_scheme(shared, {scheme_kind::baseline, 1});
  echo_spec(shared);
  std::size_t ratio = o.share_ratio;
  if (ratio == 0) {
    ratio = 1;
    for (const auto& b : resolve_blocks(shared)) ratio = std::max(ratio, b.scheme.channel_groups());
  }
  const auto T = shared.timesteps;
  for (std::size_t batch : o.batches) {
    const std::string p = "batch" + std::to_string(batch) + ".";
    const auto hb = make_hw_report(base, T, {o.n_pe, 1, batch});
    const auto hs = make_hw_report(shared, T, {o.n_pe, ratio, batch});
    std::cout << to_kv(hb, p + "baseline.") << to_kv(hs, p + "shared.");
    const double red = 1.0 - static_cast<double>(hs.traffic.total()) / static_cast<double>(hb.traffic.total());
    std::cout << p << "dram_total_reduction=" << fmt(red) << "\n";
  }
  return 0;
}

// --- synth-data -----------------------------------------------------------

struct synth_opts {
  common_opts common;
  std::string kind = "xor";
  std::size_t n = 256;
  std::size_t length = 8;
  std::string out = ".";
};

int run_synth(const synth_opts& o) {
  if (o.kind != "xor") throw config_error("unknown synthetic dataset '" + o.kind + "'");
  const auto ds = synth_temporal_xor(o.n, o.length, o.common.seed);
  std::filesystem::create_directories(o.out);
  const auto dir = std::filesystem::path(o.out);
  save_csv((dir / "xor.csv").string(), ds);
  std::ofstream man(dir / "manifest.ini");
  if (!man) throw data_error("cannot write manifest in '" + o.out + "'");
  man << "schema = " << data_schema << "\n\n[data]\ncsv = xor.csv\nchannels = 1\nlength = " << o.length
      << "\nclasses = 2\n\n[split]\ntrain = 0.64\nval = 0.16\ntest = 0.20\nseed = " << o.common.seed << "\n";
  std::cout << "samples=" << ds.size() << "\ncsv=" << (dir / "xor.csv").string()
            << "\nmanifest=" << (dir / "manifest.ini").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-membrane LIF spiking network toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  train_opts tr;
  auto* train_cmd = app.add_subcommand("train", "train a network on a dataset manifest");
  add_spec_options(train_cmd, tr.spec);
  add_common(train_cmd, tr.common);
  train_cmd->add_option("--data", tr.data, "dataset manifest")->required();
  train_cmd->add_option("--epochs", tr.cfg.epochs, "epochs");
  train_cmd->add_option("--batch", tr.cfg.batch, "mini-batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.cfg.lr0, "initial learning rate");
  train_cmd->add_option("--momentum", tr.cfg.momentum, "SGD momentum");
  train_cmd->add_option("--weight-decay", tr.cfg.weight_decay, "L2 weight decay");
  train_cmd->add_option("--backward", tr.backward, "cached | recompute");
  train_cmd->add_option("--out", tr.out, "checkpoint to write");
  train_cmd->add_option("--log", tr.log, "per-epoch metrics log file");
  train_cmd->add_flag("!--final", tr.use_best, "keep final weights instead of the best-validation epoch");

  eval_opts ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_spec_options(eval_cmd, ev.spec);
  add_common(eval_cmd, ev.common);
  eval_cmd->add_option("--data", ev.data, "dataset manifest")->required();
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--split", ev.split, "train | val | test")->check(CLI::IsMember({"train", "val", "test"}));

  gradcheck_opts gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "compare BPTT gradients with finite differences");
  add_common(gc_cmd, gc.common);
  gc_cmd->add_option("--scheme", gc.scheme, "baseline | layer | channel | layer-channel");
  gc_cmd->add_option("--groups", gc.groups, "channel groups")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--layers", gc.g.layers, "spiking layers")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--neurons", gc.g.neurons, "neurons per layer")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--inputs", gc.g.inputs, "input features")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--classes", gc.g.classes, "readout classes")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--timesteps", gc.g.timesteps, "timesteps")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--seeds", gc.g.seeds, "random networks to check")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--backward", gc.backward, "cached | recompute");
  gc_cmd->add_option("--reset", gc.reset, "soft | hard");
  gc_cmd->add_option("--tol", gc.tol, "pass threshold on max relative error");

  memreport_opts mr;
  auto* mem_cmd = app.add_subcommand("memreport", "analytic LIF memory report");
  add_spec_options(mem_cmd, mr.spec);
  add_common(mem_cmd, mr.common);
  mem_cmd->add_option("--format", mr.format, "table | kv")->check(CLI::IsMember({"table", "kv"}));
  mem_cmd->add_flag("--verify", mr.verify, "cross-check against an instrumented engine run");
  mem_cmd->add_option("--bytes-per-membrane", mr.bytes_per_membrane, "storage width")->check(CLI::PositiveNumber);

  hwreport_opts hr;
  auto* hw_cmd = app.add_subcommand("hwreport", "accelerator counting model");
  add_spec_options(hw_cmd, hr.spec);
  add_common(hw_cmd, hr.common);
  hw_cmd->add_option("--pe", hr.n_pe, "processing elements")->check(CLI::PositiveNumber);
  hw_cmd->add_option("--share-ratio", hr.share_ratio, "PEs per LIF unit (default: channel groups of the spec)");
  hw_cmd->add_option("--batch", hr.batches, "mini-batch sizes")->delimiter(',');

  synth_opts sy;
  auto* synth_cmd = app.add_subcommand("synth-data", "write a synthetic dataset and manifest");
  add_common(synth_cmd, sy.common);
  synth_cmd->add_option("--kind", sy.kind, "xor");
  synth_cmd->add_option("--n", sy.n, "samples");
  synth_cmd->add_option("--length", sy.length, "sequence length");
  synth_cmd->add_option("--out", sy.out, "output directory");

  for (auto* sub : app.get_subcommands({})) bind_env(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (auto* sub : app.get_subcommands()) {
    std::cerr << "# " << sub->get_name() << "\n";
    std::istringstream cfg(sub->config_to_str(true, false));
    for (std::string line; std::getline(cfg, line);)
      if (!line.empty()) std::cerr << "#   " << line << "\n";
  }

  try {
    if (train_cmd->parsed()) return run_train(tr);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (gc_cmd->parsed()) return run_gradcheck_cmd(gc);
    if (mem_cmd->parsed()) return run_memreport(mr);
    if (hw_cmd->parsed()) return run_hwreport(hr);
    if (synth_cmd->parsed()) return run_synth(sy);
  } catch (const numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
