// klearn: infer, evaluate and inspect background-knowledge models.
//
// Exit codes: 0 success, 2 bad flags, 3 data errors, 4 precondition errors.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "klearn/klearn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFlags = 2;
constexpr int kExitData = 3;
constexpr int kExitPrecondition = 4;

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw klearn::DataError("cannot open input: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[8192];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

// Writes via a sibling temp file and rename so readers never see a partial file.
void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path() && !fs::exists(target.parent_path()))
    throw klearn::DataError("output directory does not exist: " + target.parent_path().string());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw klearn::DataError("cannot write output: " + path);
    out << content;
    if (!out) throw klearn::DataError("write failed: " + path);
  }
  fs::rename(tmp, target);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Run {
  std::string command_line;
  std::string subcommand;
  json config = json::object();
  std::uint64_t seed = 0;
  json inputs = json::object();
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void input(const std::string& path) { inputs[path] = fnv1a_file(path); }

  void output(const std::string& path, const std::string& content) {
    write_atomic(path, content);
    outputs.push_back(path);
  }

  void write_manifest(const std::string& primary) const {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const json manifest = {{"command_line", command_line}, {"subcommand", subcommand}, {"config", config},
                           {"seed", seed},                 {"input_hashes", inputs},  {"outputs", outputs},
                           {"wall_time_seconds", wall}};
    write_atomic(primary + ".manifest.json", dump(manifest));
  }
};

// Shared flag groups ---------------------------------------------------------

struct ScoringFlags {
  double alpha = 1.0;
  double beta = 1.0;
  double eps = 1e-6;
  bool stopwords = false;
  std::size_t min_count = 1;

  void add(CLI::App* app) {
    app->add_option("--alpha", alpha, "weight of KL(S||D)")->capture_default_str();
    app->add_option("--beta", beta, "weight of KL(S||K)")->capture_default_str();
    app->add_option("--eps", eps, "additive smoothing inside KL")->capture_default_str();
    app->add_flag("--stopwords", stopwords, "remove English stopwords before counting");
    app->add_option("--min-count", min_count, "drop units seen fewer times")->capture_default_str();
  }
  klearn::ScoringConfig scoring() const {
    klearn::ScoringConfig c;
    c.alpha = alpha;
    c.beta = beta;
    c.smoothing.epsilon = eps;
    c.validate();
    return c;
  }
  klearn::TokenizerConfig tokenizer() const {
    klearn::TokenizerConfig t;
    t.remove_stopwords = stopwords;
    t.min_count = min_count;
    return t;
  }
  json to_json() const {
    return {{"alpha", alpha}, {"beta", beta}, {"eps", eps}, {"stopwords", stopwords}, {"min_count", min_count}};
  }
};

struct TrainFlags {
  std::string gamma = "1";
  std::uint64_t seed = 0;
  std::size_t epochs = 200;
  double lr = 0.1;
  std::size_t batch = 32;
  std::size_t negatives = 4;

  void add(CLI::App* app) {
    app->add_option("--gamma", gamma, "regularization weight for ms-u/ms-d, a number or 'auto'")
        ->capture_default_str();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--lr", lr, "learning rate")->capture_default_str();
    app->add_option("--batch", batch, "mini-batch size")->capture_default_str();
    app->add_option("--negatives", negatives, "negative summaries per reference (pm)")->capture_default_str();
  }
  klearn::InferenceConfig config(const ScoringFlags& sf) const {
    klearn::InferenceConfig c;
    c.scoring = sf.scoring();
    c.tokenizer = sf.tokenizer();
    c.closed_form.smoothing = c.scoring.smoothing;
    if (gamma == "auto") {
      c.closed_form.gamma_auto = true;
    } else {
      try {
        std::size_t used = 0;
        c.closed_form.gamma = std::stod(gamma, &used);
        if (used != gamma.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw CLI::ValidationError("--gamma", "expected a number or 'auto', got '" + gamma + "'");
      }
    }
    c.train.seed = seed;
    c.train.epochs = epochs;
    c.train.learning_rate = lr;
    c.train.batch_size = batch;
    c.train.negatives_per_positive = negatives;
    return c;
  }
  json to_json() const {
    return {{"gamma", gamma}, {"seed", seed}, {"epochs", epochs}, {"lr", lr}, {"batch", batch}, {"negatives", negatives}};
  }
};

std::vector<std::string> background_documents(const std::string& path) {
  const auto ds = klearn::load_dataset(path);
  std::vector<std::string> docs;
  for (const auto& t : ds.topics) docs.insert(docs.end(), t.documents.begin(), t.documents.end());
  return docs;
}

std::string csv_number(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// Subcommands ----------------------------------------------------------------

struct InferCmd {
  std::string algo, data, out, trace;
  ScoringFlags sf;
  TrainFlags tf;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("infer", "fit a background-knowledge model");
    c->add_option("--algo", algo, "ms-u | ms-d | pm | hreg | hpl")
        ->required()
        ->check(CLI::IsMember({"ms-u", "ms-d", "pm", "hreg", "hpl"}));
    c->add_option("--data", data, "dataset JSONL")->required();
    c->add_option("--out", out, "model JSON")->required();
    c->add_option("--trace", trace, "training loss CSV (epoch,loss)");
    sf.add(c);
    tf.add(c);
  }

  void run(Run& r) {
    r.input(data);
    r.seed = tf.seed;
    const auto config = tf.config(sf);
    const auto ds = klearn::load_dataset(data);
    const auto vocab = klearn::build_vocabulary(ds, config.tokenizer);
    auto model = klearn::fit_model(*klearn::parse_algorithm(algo), ds, vocab, config);
    r.config = {{"algo", algo}, {"data", data}, {"scoring", sf.to_json()}, {"training", tf.to_json()}};
    r.output(out, dump(model.to_json()));
    if (!trace.empty()) {
      std::ostringstream csv;
      csv << "epoch,loss\n";
      const auto& extra = model.provenance().extra;
      if (extra.contains("loss_trace")) {
        std::size_t e = 1;
        for (const auto& v : extra["loss_trace"]) csv << e++ << ',' << csv_number(v.get<double>()) << '\n';
      }
      r.output(trace, csv.str());
    }
    r.write_manifest(out);
  }
};

struct EvalCmd {
  std::string data, model, algo, baseline, background, out;
  std::size_t cv = 0;
  ScoringFlags sf;
  TrainFlags tf;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("eval", "Kendall tau and reference mean rank");
    c->add_option("--data", data, "dataset JSONL")->required();
    auto* m = c->add_option("--model", model, "fixed model JSON");
    auto* a = c->add_option("--algo", algo, "cross-validate this algorithm")
                  ->check(CLI::IsMember({"ms-u", "ms-d", "pm", "hreg", "hpl"}));
    auto* b = c->add_option("--baseline", baseline, "kl | js | uniform | idf")
                  ->check(CLI::IsMember({"kl", "js", "uniform", "idf"}));
    m->excludes(a)->excludes(b);
    a->excludes(b);
    c->add_option("--cv", cv, "number of folds (with --algo)");
    c->add_option("--background", background, "dataset JSONL whose documents give document frequencies (idf)");
    c->add_option("--out", out, "report JSON; per-topic CSV goes to <out>.topics.csv")->required();
    sf.add(c);
    tf.add(c);
  }

  void run(Run& r) {
    r.input(data);
    r.seed = tf.seed;
    const auto config = tf.config(sf);
    const auto ds = klearn::load_dataset(data);
    klearn::EvalReport report;
    if (!algo.empty()) {
      if (cv == 0) throw CLI::ValidationError("--cv", "--algo requires --cv N");
      report = klearn::cross_validate(ds, *klearn::parse_algorithm(algo), cv, config, tf.seed);
    } else if (!model.empty()) {
      r.input(model);
      const auto km = klearn::load_model(model);
      report = klearn::evaluate(ds, klearn::theta_scorer(km, config.scoring), km.vocab(), config.tokenizer);
      report.config = {{"algorithm", km.provenance().algorithm}, {"model_provenance", km.provenance().to_json()}};
    } else if (!baseline.empty()) {
      const auto vocab = klearn::build_vocabulary(ds, config.tokenizer);
      std::optional<klearn::KnowledgeModel> idf;
      klearn::BaselineKind kind = klearn::BaselineKind::kl_sd;
      if (baseline == "js") kind = klearn::BaselineKind::js_sd;
      if (baseline == "uniform") kind = klearn::BaselineKind::theta_uniform;
      if (baseline == "idf") {
        kind = klearn::BaselineKind::theta_idf;
        if (background.empty()) throw klearn::PreconditionError("--baseline idf requires --background");
        r.input(background);
        idf = klearn::document_frequency_model(background_documents(background), vocab, config.tokenizer);
      }
      report = klearn::evaluate(ds, klearn::baseline_scorer(kind, idf, config.scoring), vocab, config.tokenizer);
      report.config = {{"baseline", baseline}};
    } else {
      throw CLI::ValidationError("eval", "one of --model, --algo or --baseline is required");
    }
    report.config["scoring"] = sf.to_json();
    r.config = {{"data", data}, {"report", report.config}};
    r.output(out, dump(report.to_json()));
    std::ostringstream csv;
    report.write_csv(csv);
    r.output(out + ".topics.csv", csv.str());
    r.write_manifest(out);
  }
};

struct SynthCmd {
  klearn::SynthConfig config;
  std::string out, k_star;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("synth", "generate a planted-knowledge dataset");
    c->add_option("--vocab", config.vocab_size, "vocabulary size")->capture_default_str();
    c->add_option("--topics", config.n_topics)->capture_default_str();
    c->add_option("--seed", config.seed)->capture_default_str();
    c->add_option("--doc-concentration", config.doc_concentration)->capture_default_str();
    c->add_option("--summary-noise", config.summary_noise)->capture_default_str();
    c->add_option("--systems", config.n_system_summaries_per_topic, "system summaries per topic")
        ->capture_default_str();
    c->add_option("--judgment-noise", config.judgment_noise_sd)->capture_default_str();
    c->add_option("--annotators", config.annotator_count)->capture_default_str();
    c->add_option("--annotator-bias", config.annotator_bias_sd)->capture_default_str();
    c->add_option("--out", out, "dataset JSONL")->required();
    c->add_option("--k-star", k_star, "ground-truth model JSON (default: k_star.json beside --out)");
  }

  void run(Run& r) {
    r.seed = config.seed;
    const auto result = klearn::generate(config);
    if (k_star.empty()) k_star = (fs::path(out).parent_path() / "k_star.json").string();
    std::ostringstream jsonl;
    klearn::write_dataset(jsonl, result.dataset);
    r.config = {{"vocab", config.vocab_size},
                {"topics", config.n_topics},
                {"doc_concentration", config.doc_concentration},
                {"summary_noise", config.summary_noise},
                {"systems", config.n_system_summaries_per_topic},
                {"judgment_noise", config.judgment_noise_sd},
                {"annotators", config.annotator_count},
                {"annotator_bias", config.annotator_bias_sd}};
    r.output(out, jsonl.str());
    r.output(k_star, dump(result.k_star.to_json()));
    r.write_manifest(out);
  }
};

struct AverageCmd {
  std::vector<std::string> models;
  std::string out, reference, curve;
  std::size_t subsets = 20;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("average", "average models over a shared vocabulary");
    c->add_option("--models", models, "model JSON files")->required()->expected(1, -1);
    c->add_option("--out", out, "averaged model JSON")->required();
    auto* ref = c->add_option("--reference", reference, "reference model for the KL curve");
    c->add_option("--curve", curve, "CSV of KL(reference||average of m models)")->needs(ref);
    c->add_option("--subsets", subsets, "subsets drawn per m")->capture_default_str();
    c->add_option("--seed", seed)->capture_default_str();
  }

  void run(Run& r) {
    r.seed = seed;
    std::vector<klearn::KnowledgeModel> loaded;
    for (const auto& m : models) {
      r.input(m);
      loaded.push_back(klearn::load_model(m));
    }
    r.config = {{"models", models}, {"subsets", subsets}};
    r.output(out, dump(klearn::average_models(loaded).to_json()));
    if (!curve.empty()) {
      r.input(reference);
      const auto points = klearn::averaging_curve(loaded, klearn::load_model(reference), subsets, seed);
      std::ostringstream csv;
      klearn::write_curve_csv(csv, points);
      r.output(curve, csv.str());
    }
    r.write_manifest(out);
  }
};

struct GeometryCmd {
  std::string data, model, out, matrix;
  std::size_t dims = 2;
  ScoringFlags sf;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("geometry", "pairwise divergences of documents, summaries and K; MDS embedding");
    c->add_option("--data", data, "dataset JSONL")->required();
    c->add_option("--model", model, "model JSON")->required();
    c->add_option("--mds", dims, "embedding dimensions")->capture_default_str();
    c->add_option("--out", out, "embedding CSV")->required();
    c->add_option("--matrix", matrix, "also write the symmetric-KL matrix CSV");
    sf.add(c);
  }

  void run(Run& r) {
    r.input(data);
    r.input(model);
    const auto ds = klearn::load_dataset(data);
    const auto km = klearn::load_model(model);
    const auto scoring = sf.scoring();
    const auto m = klearn::geometry_matrix(ds, km, km.vocab(), scoring.smoothing, sf.tokenizer());
    r.config = {{"data", data}, {"model", model}, {"mds", dims}, {"scoring", sf.to_json()}};
    std::ostringstream csv;
    klearn::write_embedding_csv(csv, klearn::classical_mds(m, dims));
    r.output(out, csv.str());
    if (!matrix.empty()) {
      std::ostringstream mcsv;
      klearn::write_matrix_csv(mcsv, m);
      r.output(matrix, mcsv.str());
    }
    r.write_manifest(out);
  }
};

struct TopkCmd {
  std::string model, out;
  std::size_t k = 10;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("topk", "most and least known units of a model");
    c->add_option("--model", model, "model JSON")->required();
    c->add_option("-k,--k", k, "units per direction")->capture_default_str();
    c->add_option("--out", out, "CSV (direction,rank,unit,prob)")->required();
  }

  void run(Run& r) {
    r.input(model);
    const auto km = klearn::load_model(model);
    const std::size_t kk = std::min(k, km.vocab().size());
    std::ostringstream csv;
    csv << "direction,rank,unit,prob\n";
    for (auto [dir, name] : {std::pair{klearn::UnitDirection::known, "known"},
                             std::pair{klearn::UnitDirection::unknown, "unknown"}}) {
      std::size_t rank = 1;
      for (const auto& u : klearn::top_units(km, kk, dir))
        csv << name << ',' << rank++ << ',' << u.unit << ',' << csv_number(u.prob) << '\n';
    }
    r.config = {{"model", model}, {"k", kk}};
    r.output(out, csv.str());
    r.write_manifest(out);
  }
};

struct SummarizeCmd {
  std::string data, model, method = "genetic", out;
  klearn::GeneticConfig genetic;
  ScoringFlags sf;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("summarize", "extractive summaries maximizing theta_K");
    c->add_option("--data", data, "dataset JSONL")->required();
    c->add_option("--model", model, "model JSON")->required();
    c->add_option("--method", method, "greedy | genetic")
        ->check(CLI::IsMember({"greedy", "genetic"}))
        ->capture_default_str();
    c->add_option("--budget", genetic.length_budget, "words per summary")->capture_default_str();
    c->add_option("--seed", genetic.seed)->capture_default_str();
    c->add_option("--population", genetic.population)->capture_default_str();
    c->add_option("--generations", genetic.generations)->capture_default_str();
    c->add_option("--mutation", genetic.mutation_rate)->capture_default_str();
    c->add_option("--crossover", genetic.crossover_rate)->capture_default_str();
    c->add_option("--out", out, "summaries, one line per topic; report in <out>.json")->required();
    sf.add(c);
  }

  void run(Run& r) {
    r.input(data);
    r.input(model);
    r.seed = genetic.seed;
    const auto ds = klearn::load_dataset(data);
    const auto km = klearn::load_model(model);
    const auto scoring = sf.scoring();
    const auto tokenizer = sf.tokenizer();
    std::ostringstream text;
    json report = json::array();
    for (const auto& topic : ds.topics) {
      const auto pool = klearn::split_sentences(topic, km.vocab(), tokenizer);
      const auto d = klearn::text_to_distribution(topic.document_text(), km.vocab(), tokenizer);
      const auto sel = method == "greedy"
                           ? klearn::greedy_summarize(pool, d, km, genetic.length_budget, scoring)
                           : klearn::genetic_summarize(pool, d, km, genetic, scoring);
      std::string line;
      for (std::size_t i : sel.indices) line += (line.empty() ? "" : " ") + pool.sentences[i].text;
      text << topic.id << '\t' << line << '\n';
      report.push_back({{"topic_id", topic.id},
                        {"indices", sel.indices},
                        {"theta", sel.indices.empty() ? json() : json(sel.score)},
                        {"words", sel.words}});
    }
    r.config = {{"data", data}, {"model", model}, {"method", method}, {"budget", genetic.length_budget},
                {"population", genetic.population}, {"generations", genetic.generations},
                {"mutation", genetic.mutation_rate}, {"crossover", genetic.crossover_rate},
                {"scoring", sf.to_json()}};
    r.output(out, text.str());
    r.output(out + ".json", dump(report));
    r.write_manifest(out);
  }
};

struct CompareIdfCmd {
  std::string model, background, out;
  ScoringFlags sf;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("compare-idf", "correlate a model with renormalized IDF");
    c->add_option("--model", model, "model JSON")->required();
    c->add_option("--background", background, "dataset JSONL whose documents give IDF")->required();
    c->add_option("--out", out, "JSON report")->required();
    sf.add(c);
  }

  void run(Run& r) {
    r.input(model);
    r.input(background);
    const auto km = klearn::load_model(model);
    const auto idf = klearn::normalized_idf(background_documents(background), km.vocab(), sf.tokenizer());
    const auto cmp = klearn::compare_to_idf(km, klearn::renormalized_idf(idf));
    r.config = {{"model", model}, {"background", background}};
    r.output(out, dump({{"pearson", cmp.pearson}, {"spearman", cmp.spearman}, {"abs_diff", cmp.abs_diff}}));
    r.write_manifest(out);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"klearn: background-knowledge models for summary scoring"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker cap (computation is currently single-threaded)");

  InferCmd infer;
  EvalCmd eval;
  SynthCmd synth;
  AverageCmd average;
  GeometryCmd geometry;
  TopkCmd topk;
  SummarizeCmd summarize;
  CompareIdfCmd compare;
  infer.add(app);
  eval.add(app);
  synth.add(app);
  average.add(app);
  geometry.add(app);
  topk.add(app);
  summarize.add(app);
  compare.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitFlags;
  }

  Run run;
  for (int i = 0; i < argc; ++i) run.command_line += (i ? " " : "") + std::string(argv[i]);
  run.subcommand = app.get_subcommands().front()->get_name();

  try {
    const auto& name = run.subcommand;
    if (name == "infer") infer.run(run);
    else if (name == "eval") eval.run(run);
    else if (name == "synth") synth.run(run);
    else if (name == "average") average.run(run);
    else if (name == "geometry") geometry.run(run);
    else if (name == "topk") topk.run(run);
    else if (name == "summarize") summarize.run(run);
    else if (name == "compare-idf") compare.run(run);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFlags;
  } catch (const klearn::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const klearn::PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << '\n';
    return kExitPrecondition;
  } catch (const std::invalid_argument& e) {
    std::cerr << "precondition failed: " << e.what() << '\n';
    return kExitPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
