#include "stedit/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "stedit/baselines.hpp"
#include "stedit/gesl.hpp"
#include "stedit/goodness.hpp"
#include "stedit/io.hpp"
#include "stedit/kernel.hpp"
#include "stedit/transducer.hpp"
#include "text_util.hpp"

namespace stedit {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 0;
  double tol = std::numeric_limits<double>::quiet_NaN();
  int threads = 0;
  bool chars = false;

  Encoding encoding() const { return chars ? Encoding::Chars : Encoding::Tokens; }
  double tol_or(double fallback) const { return std::isnan(tol) ? fallback : tol; }
};

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

LoadedTransducer read_model(const std::string& path) {
  auto in = open_in(path);
  return load_transducer(in);
}

LoadedCostMatrix read_costs(const std::string& path) {
  auto in = open_in(path);
  return load_cost_matrix(in);
}

// Every string over the alphabet with length ≤ max_len, shortest first.
std::vector<Str> all_strings(const AlphabetPtr& alphabet, std::size_t max_len) {
  std::vector<Str> out{Str(alphabet, {})};
  std::vector<std::vector<Symbol>> layer{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<Symbol>> next;
    for (const auto& s : layer)
      for (Symbol b = 1; b <= static_cast<Symbol>(alphabet->size()); ++b) {
        auto t = s;
        t.push_back(b);
        out.emplace_back(alphabet, t);
        next.push_back(std::move(t));
      }
    layer = std::move(next);
  }
  return out;
}

std::vector<StrPair> same_class_pairs(const Dataset& ds, const std::string& pairing, std::size_t n,
                                      std::uint64_t seed) {
  std::vector<StrPair> pairs;
  if (pairing == "all") {
    for (std::size_t i = 0; i < ds.size(); ++i)
      for (std::size_t j = 0; j < ds.size(); ++j)
        if (i != j && ds.items[i].label == ds.items[j].label) pairs.push_back({ds.items[i].str, ds.items[j].str});
    return pairs;
  }
  const auto set = make_pairs(pairing == "random" ? PairStrategy::Random : PairStrategy::Levenshtein, ds.items, n, seed);
  for (const auto& e : set.entries)
    if (e.same_class) pairs.push_back({ds.items[e.i].str, ds.items[e.j].str});
  return pairs;
}

// Options that select a similarity for goodness, fit-linear and predict.
struct SimilaritySpec {
  std::string name = "ke-cos";
  std::string model;
  std::string costs;
  double t = 1.0;
  std::string zero;

  void add_to(CLI::App* app) {
    app->add_option("--similarity", name, "ke, ke-cos, klj, knb or kc")
        ->check(CLI::IsMember({"ke", "ke-cos", "klj", "knb", "kc"}))
        ->capture_default_str();
    app->add_option("--model", model, "transducer CSV (ke, ke-cos, klj)");
    app->add_option("--costs", costs, "cost matrix CSV (kc)");
    app->add_option("--t", t, "exponent of the klj kernel")->capture_default_str();
    app->add_option("--zero", zero, "zero string of the knb kernel");
  }

  // Alphabet fixed by the similarity's artifact, if any.
  AlphabetPtr alphabet() const {
    if (name == "kc") {
      require_file(costs, "--costs");
      return read_costs(costs).alphabet;
    }
    if (name == "knb") return nullptr;
    require_file(model, "--model");
    return read_model(model).model.alphabet();
  }

  SimilarityHandle build(const AlphabetPtr& alphabet, Encoding encoding) const {
    if (name == "kc") return cost_similarity_measure(read_costs(costs).costs);
    if (name == "knb") return k_nb_measure(parse_str(alphabet, zero, encoding));
    auto t_model = read_model(model).model;
    if (name == "klj") return k_lj_measure(std::move(t_model), t);
    auto ke = edit_kernel_measure(std::move(t_model));
    return name == "ke-cos" ? cosine_normalized(std::move(ke)) : ke;
  }

  static void require_file(const std::string& path, const char* flag) {
    if (path.empty()) throw InvalidArgument(std::string("this similarity needs ") + flag);
  }
};

Dataset load_with(const std::string& path, Encoding encoding, const AlphabetPtr& alphabet) {
  return load_dataset(fs::path(path), encoding, alphabet);
}

std::vector<Str> strings_of(const Dataset& ds) {
  std::vector<Str> xs;
  for (const auto& it : ds.items) xs.push_back(it.str);
  return xs;
}

std::vector<std::string> labels_of(const Dataset& ds) {
  std::vector<std::string> ls;
  for (const auto& it : ds.items) ls.push_back(it.label);
  return ls;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic edit distance, marginalized edit kernels and edit similarity learning"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--tol", g.tol, "tolerance (EM improvement, PSD check)");
  app.add_option("--threads", g.threads, "OpenMP threads (0 = runtime default)")->capture_default_str();
  app.add_flag("--chars", g.chars, "treat every character as a symbol");
  app.set_config("--config", "", "TOML/INI configuration file");

  // train-transducer
  auto* train = app.add_subcommand("train-transducer", "fit c(b|a) by EM on same-class pairs");
  std::string tr_data, tr_out, tr_report, tr_pairing = "all";
  std::size_t tr_n = 5;
  int tr_iter = 200;
  double tr_smooth = 1e-9;
  train->add_option("--data", tr_data, "training TSV")->required();
  train->add_option("--out", tr_out, "model CSV")->required();
  train->add_option("--report", tr_report, "log-likelihood trace CSV");
  train->add_option("--pairing", tr_pairing, "all, levenshtein or random")
      ->check(CLI::IsMember({"all", "levenshtein", "random"}))
      ->capture_default_str();
  train->add_option("--n", tr_n, "partners per item for levenshtein/random pairing")->capture_default_str();
  train->add_option("--max-iter", tr_iter, "EM iterations")->capture_default_str();
  train->add_option("--smoothing", tr_smooth, "added to every expected count")->capture_default_str();

  // prob
  auto* prob = app.add_subcommand("prob", "p_e(y|x) and d_e for string pairs");
  std::string pr_model, pr_x, pr_y, pr_pairs;
  prob->add_option("--model", pr_model, "transducer CSV")->required();
  prob->add_option("--x", pr_x, "input string");
  prob->add_option("--y", pr_y, "output string");
  prob->add_option("--pairs", pr_pairs, "TSV of 'x<TAB>y' lines");

  // kernel
  auto* kern = app.add_subcommand("kernel", "K_e for one pair");
  std::string k_model, k_x, k_y, k_mode = "exact";
  std::size_t k_len = 6;
  kern->add_option("--model", k_model, "transducer CSV")->required();
  kern->add_option("--x", k_x, "first string")->required();
  kern->add_option("--y", k_y, "second string")->required();
  kern->add_option("--mode", k_mode, "exact or approx")->check(CLI::IsMember({"exact", "approx"}))->capture_default_str();
  kern->add_option("--landmark-length", k_len, "approx: all strings up to this length")->capture_default_str();

  // gram
  auto* gr = app.add_subcommand("gram", "Gram matrix of a dataset");
  std::string g_model, g_data, g_out, g_mode = "exact", g_format = "csv", g_zero;
  std::size_t g_len = 6;
  double g_t = 1.0;
  bool g_norm = false;
  gr->add_option("--model", g_model, "transducer CSV");
  gr->add_option("--data", g_data, "TSV dataset")->required();
  gr->add_option("--out", g_out, "output file")->required();
  gr->add_option("--mode", g_mode, "exact, approx, klj or knb")
      ->check(CLI::IsMember({"exact", "approx", "klj", "knb"}))
      ->capture_default_str();
  gr->add_option("--format", g_format, "csv or precomputed")
      ->check(CLI::IsMember({"csv", "precomputed"}))
      ->capture_default_str();
  gr->add_option("--landmark-length", g_len, "approx: all strings up to this length")->capture_default_str();
  gr->add_option("--t", g_t, "klj exponent")->capture_default_str();
  gr->add_option("--zero", g_zero, "knb zero string");
  gr->add_flag("--normalize", g_norm, "cosine-normalize the matrix");

  // gesl
  auto* gs = app.add_subcommand("gesl", "learn an edit cost matrix");
  std::string gs_data, gs_out, gs_pairing = "levenshtein";
  std::size_t gs_n = 2;
  double gs_beta = 1.0, gs_eta = std::log(3.0);
  bool gs_sym = false;
  gs->add_option("--data", gs_data, "training TSV")->required();
  gs->add_option("--out", gs_out, "cost matrix CSV")->required();
  gs->add_option("--pairing", gs_pairing, "levenshtein or random")
      ->check(CLI::IsMember({"levenshtein", "random"}))
      ->capture_default_str();
  gs->add_option("--n", gs_n, "partners of each kind per item")->capture_default_str();
  gs->add_option("--beta", gs_beta, "Frobenius regularization")->capture_default_str();
  gs->add_option("--eta", gs_eta, "margin parameter η")->capture_default_str();
  gs->add_flag("--symmetric", gs_sym, "constrain C to be symmetric");

  // goodness
  auto* gd = app.add_subcommand("goodness", "ε(γ) curve of a similarity");
  std::string gd_data, gd_out;
  double gd_lo = 0.0, gd_hi = 1.0;
  std::size_t gd_count = 101;
  bool gd_raw = false;
  SimilaritySpec gd_sim;
  gd->add_option("--data", gd_data, "labeled TSV")->required();
  gd->add_option("--out", gd_out, "curve CSV (stdout if omitted)");
  gd->add_option("--gamma-min", gd_lo)->capture_default_str();
  gd->add_option("--gamma-max", gd_hi)->capture_default_str();
  gd->add_option("--gamma-count", gd_count)->capture_default_str();
  gd->add_flag("--raw", gd_raw, "skip z-score normalization");
  gd_sim.add_to(gd);

  // fit-linear
  auto* fl = app.add_subcommand("fit-linear", "L1-regularized linear classifier over landmarks");
  std::string fl_data, fl_out, fl_strategy = "ova";
  double fl_lambda = 1.0;
  SimilaritySpec fl_sim;
  fl->add_option("--data", fl_data, "training TSV")->required();
  fl->add_option("--out", fl_out, "linear model CSV")->required();
  fl->add_option("--lambda", fl_lambda, "L1 weight")->capture_default_str();
  fl->add_option("--strategy", fl_strategy, "ova or ovo")->check(CLI::IsMember({"ova", "ovo"}))->capture_default_str();
  fl_sim.add_to(fl);

  // predict
  auto* pd = app.add_subcommand("predict", "apply a linear model");
  std::string pd_linear, pd_data, pd_query;
  SimilaritySpec pd_sim;
  pd->add_option("--linear", pd_linear, "linear model CSV")->required();
  pd->add_option("--data", pd_data, "labeled TSV to classify");
  pd->add_option("--query", pd_query, "single string to classify");
  pd_sim.add_to(pd);

  // knn
  auto* kn = app.add_subcommand("knn", "k-nearest-neighbor classification");
  std::string kn_data, kn_test, kn_query, kn_measure = "lev", kn_model;
  std::size_t kn_k = 1;
  kn->add_option("--data", kn_data, "training TSV")->required();
  kn->add_option("--test", kn_test, "labeled TSV to classify");
  kn->add_option("--query", kn_query, "single string to classify");
  kn->add_option("--measure", kn_measure, "lev, de or de-reverse")
      ->check(CLI::IsMember({"lev", "de", "de-reverse"}))
      ->capture_default_str();
  kn->add_option("--model", kn_model, "transducer CSV for de");
  kn->add_option("--k", kn_k, "neighbors")->capture_default_str();

  // encode-freeman
  auto* fr = app.add_subcommand("encode-freeman", "PBM bitmaps to a Freeman-code dataset");
  std::string fr_in, fr_out;
  fr->add_option("--input", fr_in, "directory of .pbm files")->required();
  fr->add_option("--out", fr_out, "output TSV")->required();

  // check
  auto* ck = app.add_subcommand("check", "validate a transducer or check a Gram matrix for PSD");
  std::string ck_model, ck_gram;
  bool ck_psd = false;
  ck->add_option("--model", ck_model, "transducer CSV to validate");
  ck->add_option("--gram", ck_gram, "Gram matrix file (csv or precomputed)");
  ck->add_option("file", ck_gram, "Gram matrix file");
  ck->add_flag("--psd", ck_psd, "check positive semi-definiteness");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (g.threads > 0) omp_set_num_threads(g.threads);
    const Encoding enc = g.encoding();

    if (train->parsed()) {
      const auto ds = load_dataset(fs::path(tr_data), enc);
      if (ds.alphabet->empty()) throw InvalidArgument("training data has no symbols");
      const auto pairs = same_class_pairs(ds, tr_pairing, tr_n, g.seed);
      if (pairs.empty()) throw InvalidArgument("no same-class pairs in the training data");
      EmOptions opt;
      opt.max_iter = tr_iter;
      opt.tol = g.tol_or(opt.tol);
      opt.smoothing = tr_smooth;
      const auto fit = em_fit(pairs, uniform_init(ds.alphabet), opt);
      auto o = open_out(tr_out);
      save_transducer(o, fit.model,
                      {{"smoothing", detail::format_double(tr_smooth)},
                       {"pairs", std::to_string(pairs.size())},
                       {"iterations", std::to_string(fit.report.iterations)},
                       {"converged", fit.report.converged ? "1" : "0"}});
      if (!tr_report.empty()) {
        auto r = open_out(tr_report);
        save_em_report(r, fit.report);
      }
      out << "iterations=" << fit.report.iterations << " mean_loglik="
          << detail::format_double(fit.report.loglik_trace.back()) << '\n';
      return 0;
    }

    if (prob->parsed()) {
      const auto model = read_model(pr_model).model;
      std::vector<std::pair<std::string, std::string>> items;
      if (!pr_pairs.empty()) {
        auto in = open_in(pr_pairs);
        std::string line;
        std::size_t no = 0;
        while (std::getline(in, line)) {
          ++no;
          const auto t = detail::trim(line);
          if (t.empty() || t.front() == '#') continue;
          const auto tab = line.find('\t');
          if (tab == std::string::npos) throw ParseError("expected 'x<TAB>y'", no);
          items.emplace_back(line.substr(0, tab), line.substr(tab + 1));
        }
      } else {
        items.emplace_back(pr_x, pr_y);
      }
      for (const auto& [xs, ys] : items) {
        const auto x = parse_str(model.alphabet(), xs, enc), y = parse_str(model.alphabet(), ys, enc);
        out << detail::format_double(cond_prob(model, x, y)) << '\t'
            << detail::format_double(edit_dissimilarity(model, x, y)) << '\n';
      }
      return 0;
    }

    if (kern->parsed()) {
      const auto model = read_model(k_model).model;
      const auto x = parse_str(model.alphabet(), k_x, enc), y = parse_str(model.alphabet(), k_y, enc);
      const double v = k_mode == "exact" ? kernel_exact(model, x, y)
                                         : kernel_approx(model, x, y, all_strings(model.alphabet(), k_len));
      out << detail::format_double(v) << '\n';
      return 0;
    }

    if (gr->parsed()) {
      GramMatrix gm;
      Dataset ds;
      if (g_mode == "knb") {
        ds = load_dataset(fs::path(g_data), enc);
        const auto zero = parse_str(ds.alphabet, g_zero, enc);
        gm = gram_baseline(strings_of(ds), "knb", [&](const Str& a, const Str& b) { return k_nb(zero, a, b); },
                           g_norm);
      } else {
        if (g_model.empty()) throw InvalidArgument("--model is required for mode " + g_mode);
        const auto model = read_model(g_model).model;
        ds = load_with(g_data, enc, model.alphabet());
        const auto xs = strings_of(ds);
        if (g_mode == "klj") {
          gm = gram_baseline(xs, "klj", [&](const Str& a, const Str& b) { return k_lj(model, g_t, a, b); }, g_norm);
        } else {
          GramOptions opt;
          opt.normalize = g_norm;
          if (g_mode == "approx") {
            opt.mode = GramMode::Approximate;
            opt.landmarks = all_strings(model.alphabet(), g_len);
          }
          gm = gram(model, xs, opt);
        }
      }
      const auto labels = labels_of(ds);
      export_gram(fs::path(g_out), gm, labels, g_format == "csv" ? GramFormat::Csv : GramFormat::PrecomputedKernel);
      return 0;
    }

    if (gs->parsed()) {
      const auto ds = load_dataset(fs::path(gs_data), enc);
      const auto strategy = gs_pairing == "random" ? PairStrategy::Random : PairStrategy::Levenshtein;
      const auto pairs = make_pairs(strategy, ds.items, gs_n, g.seed);
      GeslOptions opt;
      opt.beta = gs_beta;
      opt.eta = gs_eta;
      opt.symmetric = gs_sym;
      const auto sol = gesl_fit(pairs, ds.items, opt);
      auto o = open_out(gs_out);
      save_cost_matrix(o, sol.costs, *ds.alphabet,
                       {{"beta", detail::format_double(gs_beta)},
                        {"eta", detail::format_double(gs_eta)},
                        {"strategy", gs_pairing},
                        {"n", std::to_string(gs_n)},
                        {"alpha", detail::format_double(pairs.alpha())},
                        {"seed", std::to_string(g.seed)},
                        {"symmetric", gs_sym ? "1" : "0"},
                        {"B1", detail::format_double(sol.b1)},
                        {"B2", detail::format_double(sol.b2)},
                        {"objective", detail::format_double(sol.objective)}});
      out << "objective=" << detail::format_double(sol.objective) << " B1=" << detail::format_double(sol.b1)
          << " B2=" << detail::format_double(sol.b2) << '\n';
      return 0;
    }

    if (gd->parsed()) {
      const auto alphabet = gd_sim.alphabet();
      const auto ds = load_dataset(fs::path(gd_data), enc, alphabet);
      const auto sim = gd_sim.build(ds.alphabet, enc);
      const auto xs = strings_of(ds);
      auto gm = gram_baseline(xs, sim.name, [&](const Str& a, const Str& b) { return sim(a, b); });
      if (!gd_raw) {
        const auto z = fit_similarity_normalizer(gm.values);
        for (double& v : gm.values) v = z(v);
      }
      const auto gammas = gamma_grid(gd_lo, gd_hi, gd_count);
      const auto curve = estimate_goodness_curve(gm.n, gm.values, labels_of(ds), gammas);
      if (gd_out.empty()) {
        save_goodness_curve(out, curve);
      } else {
        auto o = open_out(gd_out);
        save_goodness_curve(o, curve);
      }
      return 0;
    }

    if (fl->parsed()) {
      const auto alphabet = fl_sim.alphabet();
      const auto ds = load_dataset(fs::path(fl_data), enc, alphabet);
      const auto sim = fl_sim.build(ds.alphabet, enc);
      const auto strategy = fl_strategy == "ova" ? MulticlassStrategy::OneVsAll : MulticlassStrategy::OneVsOne;
      auto model = fit_multiclass(strategy, sim, ds.items, {}, fl_lambda);
      for (auto& m : model.models) m.similarity = fl_sim.name;
      auto o = open_out(fl_out);
      save_multiclass(o, model);
      std::size_t nz = 0;
      for (const auto& m : model.models) nz += m.sparsity();
      out << "models=" << model.models.size() << " nonzero=" << nz << '\n';
      return 0;
    }

    if (pd->parsed()) {
      auto alphabet = pd_sim.alphabet();
      Dataset ds;
      if (!pd_data.empty()) {
        ds = load_dataset(fs::path(pd_data), enc, alphabet);
        alphabet = ds.alphabet;
      }
      if (!alphabet) throw InvalidArgument("predict needs --data or a similarity artifact to fix the alphabet");
      auto in = open_in(pd_linear);
      const auto model = load_multiclass(in, alphabet);
      const auto sim = pd_sim.build(alphabet, enc);
      if (!pd_query.empty()) {
        out << predict_multiclass(model, sim, parse_str(alphabet, pd_query, enc)) << '\n';
        return 0;
      }
      std::size_t correct = 0;
      for (const auto& it : ds.items) {
        const auto label = predict_multiclass(model, sim, it.str);
        correct += label == it.label;
        out << it.label << '\t' << label << '\n';
      }
      if (!ds.items.empty())
        out << "# accuracy=" << detail::format_double(static_cast<double>(correct) / static_cast<double>(ds.size()))
            << '\n';
      return 0;
    }

    if (kn->parsed()) {
      AlphabetPtr alphabet;
      SimilarityHandle measure = levenshtein_measure();
      if (kn_measure != "lev") {
        if (kn_model.empty()) throw InvalidArgument("--model is required for measure " + kn_measure);
        auto model = read_model(kn_model).model;
        alphabet = model.alphabet();
        measure = edit_dissimilarity_measure(
            std::move(model), kn_measure == "de" ? DeDirection::TrainGivenQuery : DeDirection::QueryGivenTrain);
      }
      const auto train_ds = load_dataset(fs::path(kn_data), enc, alphabet);
      if (!kn_query.empty()) {
        const auto q = parse_str(train_ds.alphabet, kn_query, enc);
        out << knn_classify(measure, train_ds.items, kn_k, q) << '\n';
        return 0;
      }
      if (kn_test.empty()) throw InvalidArgument("knn needs --query or --test");
      const auto test_ds = load_with(kn_test, enc, train_ds.alphabet);
      const auto predicted = knn_classify_batch(measure, train_ds.items, kn_k, strings_of(test_ds));
      std::size_t correct = 0;
      for (std::size_t i = 0; i < test_ds.size(); ++i) {
        correct += predicted[i] == test_ds.items[i].label;
        out << test_ds.items[i].label << '\t' << predicted[i] << '\n';
      }
      if (test_ds.size())
        out << "# accuracy="
            << detail::format_double(static_cast<double>(correct) / static_cast<double>(test_ds.size())) << '\n';
      return 0;
    }

    if (fr->parsed()) {
      const fs::path root(fr_in);
      if (!fs::is_directory(root)) throw Error("'" + fr_in + "' is not a directory");
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().extension() == ".pbm") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      std::vector<LabeledStr> items;
      for (const auto& f : files) {
        std::string label;
        const auto rel = fs::relative(f, root);
        if (rel.has_parent_path() && !rel.parent_path().empty())
          label = rel.begin()->string();
        else
          label = f.stem().string().substr(0, f.stem().string().find('_'));
        try {
          items.push_back({freeman_encode(read_pbm(f)), label});
        } catch (const Error& e) {
          throw Error(f.string() + ": " + e.what());
        }
      }
      save_dataset(fs::path(fr_out), items);
      out << "encoded=" << items.size() << '\n';
      return 0;
    }

    if (ck->parsed()) {
      bool ok = true;
      if (ck_model.empty() && ck_gram.empty()) throw InvalidArgument("check needs --model or a Gram matrix file");
      if (!ck_model.empty()) {
        const auto rep = validate(read_model(ck_model).model, g.tol_or(1e-9));
        out << "model " << (rep.ok ? "ok" : "invalid") << " max_residual=" << detail::format_double(rep.max_residual)
            << '\n';
        for (const auto& v : rep.violations) out << "  " << v << '\n';
        ok = ok && rep.ok;
      }
      if (!ck_gram.empty()) {
        auto in = open_in(ck_gram);
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        const std::string head = text.substr(0, text.find('\n'));
        const auto first = detail::trim(head);
        GramMatrix gm;
        if (!first.empty() && (first.front() == '#' || first.rfind("id,", 0) == 0)) {
          std::istringstream s(text);
          gm = read_gram_csv(s);
        } else {
          std::istringstream s(text);
          gm = read_gram_precomputed(s);
        }
        if (ck_psd || ck_model.empty()) {
          const auto rep = check_psd(gm, g.tol_or(1e-8));
          out << "psd " << (rep.ok ? "ok" : "fail") << " lambda_min=" << detail::format_double(rep.lambda_min)
              << " trace=" << detail::format_double(rep.trace) << '\n';
          ok = ok && rep.ok;
        }
      }
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace stedit
