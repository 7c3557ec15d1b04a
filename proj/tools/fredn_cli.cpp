// fredn command-line tool: train / eval / synth / decompose / gradcheck.
//
// Exit codes: 0 success, 1 usage or configuration, 2 data, 3 numeric
// (divergence or a failed gradient check).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fredn/checkpoint.hpp"
#include "fredn/data.hpp"
#include "fredn/decomposition.hpp"
#include "fredn/gradcheck.hpp"
#include "fredn/model.hpp"
#include "fredn/signal_gen.hpp"
#include "fredn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Quotes a CSV field when needed (RFC 4180).
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw fredn::DataError("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------
// Config files: a flat JSON object whose keys are long option names. Values
// are replayed as arguments ahead of the real command line; options take the
// last occurrence, so flags override the file.

CLI::Option* find_long_option(CLI::App& app, const std::string& key) {
  for (CLI::Option* opt : app.get_options()) {
    for (const auto& name : opt->get_lnames()) {
      if (name == key) return opt;
    }
  }
  return nullptr;
}

std::vector<std::string> config_arguments(CLI::App& app, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fredn::DataError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw fredn::ConfigError("config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw fredn::ConfigError("config '" + path + "' must be a JSON object");
  std::vector<std::string> args;
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    CLI::Option* opt = find_long_option(app, key);
    if (!opt) throw fredn::ConfigError("config '" + path + "': unknown key '" + key + "'");
    auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (opt->get_expected_min() == 0) {
      if (!value.is_boolean()) throw fredn::ConfigError("config key '" + key + "' must be true or false");
      if (value.get<bool>()) args.push_back("--" + key);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        args.push_back("--" + key);
        args.push_back(scalar(v));
      }
    } else {
      args.push_back("--" + key);
      args.push_back(scalar(value));
    }
  }
  return args;
}

// Every option of `app` with its effective value.
json resolved_config(CLI::App& app) {
  json out = json::object();
  for (CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string key = opt->get_lnames().front();
    if (key == "help" || key == "config") continue;
    if (opt->get_expected_min() == 0) {
      out[key] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (values.empty() && !opt->get_default_str().empty()) values.push_back(opt->get_default_str());
    auto typed = [](const std::string& s) -> json {
      double d = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
      if (ec == std::errc() && ptr == s.data() + s.size()) {
        long long i = 0;
        const auto [iptr, iec] = std::from_chars(s.data(), s.data() + s.size(), i);
        if (iec == std::errc() && iptr == s.data() + s.size()) return i;
        return d;
      }
      return s;
    };
    if (opt->get_items_expected_max() > 1) {
      json arr = json::array();
      for (const auto& v : values) arr.push_back(typed(v));
      out[key] = arr;
    } else if (!values.empty()) {
      out[key] = typed(values.back());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared training / data flags

struct RunFlags {
  std::string data;
  bool ett = false;
  long rows = 0;
  bool raw = false;
  bool no_context = false;
  fredn::TrainConfig train;
  std::string variant = "fredn";
  std::string loss = "freq-mae";
  std::string schedule = "typ1";
  std::string out = "run";
};

void add_model_flags(CLI::App* cmd, RunFlags& f) {
  auto& m = f.train.model;
  f.train.model.lookback = 96;
  f.train.model.horizon = 96;
  cmd->add_option("--lookback", m.lookback, "Lookback length L")->capture_default_str();
  cmd->add_option("--horizon", m.horizon, "Forecast horizon tau")->capture_default_str();
  cmd->add_option("--variant", f.variant, "fredn | movdn | topkdn | complex-linear")->capture_default_str();
  cmd->add_option("--ma-window", m.ma_window, "Moving-average window (movdn)")->capture_default_str();
  cmd->add_option("--topk", m.topk, "Retained bins (topkdn); 0 = floor(log2 L)")->capture_default_str();
  cmd->add_option("--d", m.embed_dim, "Embedding size")->capture_default_str();
  cmd->add_option("--hidden", m.hidden_size, "ResMLP hidden size")->capture_default_str();
  cmd->add_option("--depth", m.depth, "ResMLP depth")->capture_default_str();
  cmd->add_option("--dropout", m.dropout, "Dropout rate")->capture_default_str();
  cmd->add_option("--mask-order", m.mask_init_order, "Disentangler init order m")->capture_default_str();
}

void add_data_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--data", f.data, "CSV: header, timestamp column, numeric channels")->required();
  cmd->add_flag("--ett", f.ett, "ETT-family 6:2:2 split (default 7:1:2)");
  cmd->add_option("--rows", f.rows, "Use only the first N rows (0 = all)")->capture_default_str();
  cmd->add_flag("--raw", f.raw, "Skip dataset-level z-score standardization");
  cmd->add_flag("--no-context", f.no_context, "Keep val/test lookbacks inside their own split");
}

void add_train_flags(CLI::App* cmd, RunFlags& f) {
  auto& t = f.train;
  cmd->add_option("--loss", f.loss, "time-mse | time-mae | freq-mse | freq-mae")->capture_default_str();
  cmd->add_option("--seed", t.seed, "Random seed")->capture_default_str();
  cmd->add_option("--lr", t.learning_rate, "Base learning rate")->capture_default_str();
  cmd->add_option("--schedule", f.schedule, "typ1 | cosine")->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "Maximum epochs")->capture_default_str();
  cmd->add_option("--patience", t.patience, "Early-stopping patience")->capture_default_str();
  cmd->add_option("--batch", t.batch_size, "Batch size (windows)")->capture_default_str();
}

// Copies the string-valued flags and data options into the TrainConfig.
void finalize(RunFlags& f, Eigen::Index channels) {
  f.train.model.channels = channels;
  f.train.model.variant = fredn::parse_variant(f.variant);
  f.train.loss = fredn::parse_loss_kind(f.loss);
  f.train.schedule = fredn::parse_schedule(f.schedule);
  f.train.ratios = fredn::default_ratios(f.ett);
  f.train.max_rows = f.rows;
  f.train.standardize = !f.raw;
  f.train.borrow_context = !f.no_context;
}

json report_json(const fredn::EvalReport& r) {
  return {{"mse", r.mse},
          {"mae", r.mae},
          {"mse_by_step", r.mse_by_step},
          {"mae_by_step", r.mae_by_step},
          {"mse_by_channel", r.mse_by_channel},
          {"mae_by_channel", r.mae_by_channel},
          {"windows", r.windows},
          {"param_count", r.param_count},
          {"seconds", r.seconds}};
}

json breakdown_json(const fredn::ParamCount& c) {
  return {{"spectral", c.spectral},         {"season_head", c.season_head}, {"trend", c.trend},
          {"trend_head", c.trend_head},     {"disentangler", c.disentangler}, {"embedding", c.embedding},
          {"revin", c.revin},               {"total", c.total()}};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_train(RunFlags& f, const json& resolved) {
  const fredn::Dataset ds = fredn::load_csv(f.data);
  finalize(f, ds.channels());
  f.train.validate();
  const fredn::PreparedData data = fredn::prepare(ds, f.train);
  const fs::path out(f.out);
  fs::create_directories(out);
  write_json(out / "config.json", resolved);

  std::cerr << "train windows " << data.train.count << ", val " << data.val.count << ", test " << data.test.count
            << "; parameters " << fredn::param_count(fredn::ModelParams::create(f.train.model, 0)).total() << '\n';
  const auto result = fredn::train(data, f.train, [](const fredn::EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << "  train " << r.train_loss << "  val " << r.val_loss << "  lr " << r.lr
              << std::endl;
  });

  fredn::save_checkpoint({result.params, data.scaler}, (out / "checkpoint.json").string());
  auto history = open_out(out / "history.csv");
  history << "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : result.history) {
    history << r.epoch << ',' << num(r.train_loss) << ',' << num(r.val_loss) << ',' << num(r.lr) << '\n';
  }
  fredn::EvalReport val = fredn::evaluate(result.params, data.val);
  json report = report_json(val);
  report["split"] = "val";
  report["best_epoch"] = result.best_epoch;
  report["train_seconds"] = result.seconds;
  report["param_breakdown"] = breakdown_json(fredn::param_count(result.params));
  write_json(out / "val_report.json", report);
  std::cout << "best epoch " << result.best_epoch << ", val mse " << val.mse << ", val mae " << val.mae << " ("
            << result.seconds << " s)\n";
  return kOk;
}

struct EvalFlags {
  std::string checkpoint;
  std::string dump;
  std::string out;
  std::optional<long> lookback, horizon;
};

int cmd_eval(RunFlags& f, EvalFlags& e) {
  const fredn::Checkpoint ck = fredn::load_checkpoint(e.checkpoint);
  const auto& mc = ck.params.config;
  if ((e.lookback && *e.lookback != mc.lookback) || (e.horizon && *e.horizon != mc.horizon)) {
    throw fredn::ConfigError("flags ask for L=" + std::to_string(e.lookback.value_or(mc.lookback)) + ", tau=" +
                             std::to_string(e.horizon.value_or(mc.horizon)) + " but the checkpoint has L=" +
                             std::to_string(mc.lookback) + ", tau=" + std::to_string(mc.horizon));
  }
  const fredn::Dataset ds = fredn::load_csv(f.data);
  if (ds.channels() != mc.channels) {
    throw fredn::ConfigError("data has " + std::to_string(ds.channels()) + " channels but the checkpoint expects " +
                             std::to_string(mc.channels));
  }
  f.train.model = mc;
  f.train.ratios = fredn::default_ratios(f.ett);
  f.train.max_rows = f.rows;
  f.train.borrow_context = !f.no_context;
  const fredn::PreparedData data = fredn::prepare(ds, f.train, &ck.scaler);

  fredn::PredictionSink sink;
  std::ofstream dump;
  if (!e.dump.empty()) {
    dump = open_out(e.dump);
    dump << "window,channel,step,y,y_hat,y_raw,y_hat_raw\n";
    const Eigen::Index channels = mc.channels;
    sink = [&](std::span<const Eigen::Index> windows, const fredn::Tensor& y, const fredn::Tensor& y_hat) {
      for (std::size_t b = 0; b < windows.size(); ++b) {
        for (Eigen::Index c = 0; c < channels; ++c) {
          const Eigen::Index col = static_cast<Eigen::Index>(b) * channels + c;
          const double sd = ck.scaler.stddev(c), mu = ck.scaler.mean(c);
          for (Eigen::Index t = 0; t < y.rows(); ++t) {
            dump << windows[b] << ',' << c << ',' << t << ',' << num(y(t, col)) << ',' << num(y_hat(t, col)) << ','
                 << num(y(t, col) * sd + mu) << ',' << num(y_hat(t, col) * sd + mu) << '\n';
          }
        }
      }
    };
  }
  const fredn::EvalReport test = fredn::evaluate(ck.params, data.test, 256, sink);
  const fredn::EvalReport naive = fredn::naive_baseline(data.test);
  json report = report_json(test);
  report["split"] = "test";
  report["variant"] = fredn::to_string(mc.variant);
  report["param_breakdown"] = breakdown_json(fredn::param_count(ck.params));
  report["baseline_repeat_last"] = {{"mse", naive.mse}, {"mae", naive.mae}};
  const std::string text = report.dump(2);
  if (!e.out.empty()) open_out(e.out) << text << '\n';
  std::cout << text << '\n';
  return kOk;
}

struct SynthFlags {
  fredn::SyntheticConfig cfg;
  std::vector<std::string> seasons;
  long k_min = 4, k_max = 64;
  std::string out = "synth";
};

fredn::SeasonalComponent parse_season(const std::string& s) {
  // cycles:amplitude:phase
  fredn::SeasonalComponent c;
  const auto a = s.find(':');
  const auto b = a == std::string::npos ? a : s.find(':', a + 1);
  try {
    if (a == std::string::npos || b == std::string::npos) throw std::invalid_argument(s);
    c.cycles = std::stod(s.substr(0, a));
    c.amplitude = std::stod(s.substr(a + 1, b - a - 1));
    c.phase = std::stod(s.substr(b + 1));
  } catch (const std::logic_error&) {
    throw fredn::ConfigError("--season expects cycles:amplitude:phase, got '" + s + "'");
  }
  return c;
}

int cmd_synth(SynthFlags& f) {
  if (!f.seasons.empty()) {
    f.cfg.seasonal.clear();
    for (const auto& s : f.seasons) f.cfg.seasonal.push_back(parse_season(s));
  }
  const fredn::SyntheticSignal sig = fredn::make_synthetic(f.cfg);
  const fs::path out(f.out);
  auto comp = open_out(out / "components.csv");
  comp << "t,trend,seasonal,noise,composite\n";
  for (std::size_t t = 0; t < sig.length; ++t) {
    comp << t << ',' << num(sig.trend[t]) << ',' << num(sig.seasonal[t]) << ',' << num(sig.noise[t]) << ','
         << num(sig.composite[t]) << '\n';
  }
  const auto spec = [](const std::vector<double>& v) { return fredn::rfft(std::span<const double>(v)); };
  const fredn::Spectrum st = spec(sig.trend), ss = spec(sig.seasonal), sn = spec(sig.noise), sc = spec(sig.composite);
  auto spectra = open_out(out / "spectra.csv");
  spectra << "k,trend,seasonal,noise,composite\n";
  for (Eigen::Index k = 0; k < st.n_freq(); ++k) {
    spectra << k << ',' << num(st.magnitude(k)) << ',' << num(ss.magnitude(k)) << ',' << num(sn.magnitude(k)) << ','
            << num(sc.magnitude(k)) << '\n';
  }
  const fredn::SpectralProportions p = fredn::spectral_proportions(sig);
  auto prop = open_out(out / "proportions.csv");
  prop << "k,trend,seasonal,noise,degenerate\n";
  for (Eigen::Index k = 0; k < p.shares.rows(); ++k) {
    prop << k << ',' << num(p.shares(k, 0)) << ',' << num(p.shares(k, 1)) << ',' << num(p.shares(k, 2)) << ','
         << (p.degenerate[static_cast<std::size_t>(k)] ? 1 : 0) << '\n';
  }
  auto decay = open_out(out / "decay.csv");
  decay << "series,degree,k_min,k_max,exponent\n";
  decay << "trend," << f.cfg.trend_degree << ',' << f.k_min << ',' << f.k_max << ','
        << num(fredn::spectral_decay_fit(st, f.k_min, f.k_max)) << '\n';
  std::cout << "wrote components.csv, spectra.csv, proportions.csv, decay.csv to " << out.string() << '\n';
  return kOk;
}

struct DecomposeFlags {
  std::string data;
  std::string method = "ma";
  long window = 25;
  long k = 0;
  double order = 1.0;
  long channel = 0;
  long start = 0;
  long len = 720;
  std::string out = "decompose";
};

int cmd_decompose(DecomposeFlags& f) {
  const fredn::Dataset ds = fredn::load_csv(f.data);
  if (f.channel < 0 || f.channel >= ds.channels()) {
    throw fredn::ConfigError("--channel " + std::to_string(f.channel) + " outside [0, " +
                             std::to_string(ds.channels()) + ")");
  }
  if (f.len < 2 || f.start < 0 || f.start + f.len > ds.rows()) {
    throw fredn::ConfigError("--start/--len select rows outside the " + std::to_string(ds.rows()) + "-row dataset");
  }
  const Eigen::MatrixXd x = ds.values.block(f.start, f.channel, f.len, 1);
  fredn::DecompositionResult r;
  if (f.method == "ma") {
    r = fredn::moving_average_decomp(x, f.window);
  } else if (f.method == "topk") {
    r = fredn::topk_decomp(x, f.k > 0 ? f.k : fredn::topk_heuristic(static_cast<std::size_t>(f.len)));
  } else if (f.method == "fred") {
    // Untrained disentangler at its initial gate.
    const fredn::Spectrum spec = fredn::rfft(x);
    const auto split = fredn::fred_split(spec, fredn::init_mask(spec.n_freq(), 1, f.order));
    r.method = fredn::DecompositionMethod::FreD;
    r.trend = fredn::irfft(split.trend, static_cast<std::size_t>(f.len), fredn::HermitianPolicy::Project);
    r.seasonal = x - r.trend;
  } else {
    throw fredn::ConfigError("--method must be ma, topk or fred");
  }
  const fs::path out(f.out);
  auto series = open_out(out / "series.csv");
  series << "t,timestamp,x,trend,season\n";
  for (long t = 0; t < f.len; ++t) {
    series << t << ',' << csv_field(ds.timestamps[static_cast<std::size_t>(f.start + t)]) << ',' << num(x(t, 0)) << ','
           << num(r.trend(t, 0)) << ',' << num(r.seasonal(t, 0)) << '\n';
  }
  const fredn::Spectrum sx = fredn::rfft(x), st = fredn::rfft(r.trend), ss = fredn::rfft(r.seasonal);
  auto spectra = open_out(out / "spectra.csv");
  spectra << "k,freq,input,trend,season,trend_ratio" << (f.method == "ma" ? ",ma_response" : "") << '\n';
  for (Eigen::Index k = 0; k < sx.n_freq(); ++k) {
    const double freq = static_cast<double>(k) / static_cast<double>(f.len);
    const double in = sx.magnitude(k);
    spectra << k << ',' << num(freq) << ',' << num(in) << ',' << num(st.magnitude(k)) << ',' << num(ss.magnitude(k))
            << ',' << (in > 0.0 ? num(st.magnitude(k) / in) : std::string());
    if (f.method == "ma") spectra << ',' << num(std::abs(fredn::ma_frequency_response(freq, static_cast<int>(f.window))));
    spectra << '\n';
  }
  std::cout << "wrote series.csv and spectra.csv to " << out.string() << '\n';
  return kOk;
}

struct GradcheckFlags {
  std::string config = "tiny";
  double tol = 1e-4;
  std::uint64_t seed = 1;
};

int cmd_gradcheck(const GradcheckFlags& f) {
  if (f.config != "tiny") throw fredn::ConfigError("gradcheck: only --config tiny is available");
  std::map<std::string, double> worst_by_group;
  double worst = 0.0;
  for (fredn::Variant v : fredn::kAllVariants) {
    for (fredn::LossKind k : fredn::kAllLossKinds) {
      const auto report = fredn::gradient_check(fredn::tiny_model_config(v), k, f.seed);
      for (const auto& e : report.entries) {
        const std::string group = e.tensor.substr(0, e.tensor.find('.'));
        worst_by_group[group] = std::max(worst_by_group[group], e.rel_error);
      }
      std::cout << fredn::to_string(v) << " / " << fredn::to_string(k) << ": max rel err " << report.worst() << '\n';
      worst = std::max(worst, report.worst());
    }
  }
  std::cout << "worst by parameter group:\n";
  for (const auto& [group, err] : worst_by_group) std::cout << "  " << group << "  " << err << '\n';
  const bool ok = worst < f.tol;
  std::cout << (ok ? "PASS" : "FAIL") << "  max rel err " << worst << " (tolerance " << f.tol << ")\n";
  return ok ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FreDN forecasting toolkit"};
  app.require_subcommand(1);

  RunFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "Train a model and write checkpoint, history and reports");
  train->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  add_data_flags(train, train_flags);
  add_model_flags(train, train_flags);
  add_train_flags(train, train_flags);
  train->add_option("--out", train_flags.out, "Output directory")->capture_default_str();

  RunFlags eval_flags;
  EvalFlags eval_extra;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_data_flags(eval, eval_flags);
  eval->add_option("--checkpoint", eval_extra.checkpoint, "Checkpoint JSON")->required();
  eval->add_option("--lookback", eval_extra.lookback, "Expected lookback (checked against the checkpoint)");
  eval->add_option("--horizon", eval_extra.horizon, "Expected horizon (checked against the checkpoint)");
  eval->add_option("--dump-predictions", eval_extra.dump, "CSV with one row per (window, channel, step)");
  eval->add_option("--out", eval_extra.out, "Also write the report JSON here");

  SynthFlags synth_flags;
  CLI::App* synth = app.add_subcommand("synth", "Synthetic trend + seasonal + noise study");
  synth->add_option("--len", synth_flags.cfg.length, "Series length")->capture_default_str();
  synth->add_option("--trend-degree", synth_flags.cfg.trend_degree, "B-spline degree")->capture_default_str();
  synth->add_option("--trend-knots", synth_flags.cfg.trend_knots, "B-spline coefficients")->capture_default_str();
  synth->add_option("--trend-amplitude", synth_flags.cfg.trend_amplitude, "Coefficient range")->capture_default_str();
  synth->add_option("--season", synth_flags.seasons, "cycles:amplitude:phase (repeatable)");
  synth->add_option("--noise", synth_flags.cfg.noise_std, "Noise standard deviation")->capture_default_str();
  synth->add_option("--seed", synth_flags.cfg.seed, "Random seed")->capture_default_str();
  synth->add_option("--k-min", synth_flags.k_min, "Decay fit lower bin")->capture_default_str();
  synth->add_option("--k-max", synth_flags.k_max, "Decay fit upper bin")->capture_default_str();
  synth->add_option("--out", synth_flags.out, "Output directory")->capture_default_str();

  DecomposeFlags dec_flags;
  CLI::App* dec = app.add_subcommand("decompose", "Trend / season split of one channel");
  dec->add_option("--data", dec_flags.data, "CSV dataset")->required();
  dec->add_option("--method", dec_flags.method, "ma | topk | fred")->capture_default_str();
  dec->add_option("--window", dec_flags.window, "Moving-average window")->capture_default_str();
  dec->add_option("--k", dec_flags.k, "Top-K bins (0 = floor(log2 len))")->capture_default_str();
  dec->add_option("--order", dec_flags.order, "Initial disentangler order (fred)")->capture_default_str();
  dec->add_option("--channel", dec_flags.channel, "Channel index")->capture_default_str();
  dec->add_option("--start", dec_flags.start, "First row")->capture_default_str();
  dec->add_option("--len", dec_flags.len, "Number of rows")->capture_default_str();
  dec->add_option("--out", dec_flags.out, "Output directory")->capture_default_str();

  GradcheckFlags gc_flags;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of every model gradient");
  gc->add_option("--config", gc_flags.config, "Configuration preset")->capture_default_str();
  gc->add_option("--tol", gc_flags.tol, "Relative error tolerance")->capture_default_str();
  gc->add_option("--seed", gc_flags.seed, "Random seed")->capture_default_str();

  std::string train_config;
  train->add_option("--config", train_config, "JSON file of option values (flags take precedence)");

  try {
    try {
      std::vector<std::string> args(argv + 1, argv + argc);
      // train --config FILE: splice the file's options in ahead of the flags.
      if (!args.empty() && args[0] == "train") {
        for (std::size_t i = 1; i < args.size(); ++i) {
          std::string path;
          if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
          if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
          if (path.empty()) continue;
          const auto file_args = config_arguments(*train, path);
          args.insert(args.begin() + 1, file_args.begin(), file_args.end());
          break;
        }
      }
      std::reverse(args.begin(), args.end());
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      return app.exit(e) == 0 ? kOk : kUsage;
    }
    if (*train) return cmd_train(train_flags, resolved_config(*train));
    if (*eval) return cmd_eval(eval_flags, eval_extra);
    if (*synth) return cmd_synth(synth_flags);
    if (*dec) return cmd_decompose(dec_flags);
    if (*gc) return cmd_gradcheck(gc_flags);
  } catch (const fredn::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const fredn::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const fredn::SingularError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const fredn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
