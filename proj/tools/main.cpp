#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "manifold_id/analysis.hpp"
#include "manifold_id/errors.hpp"
#include "manifold_id/estimators.hpp"
#include "manifold_id/io.hpp"
#include "manifold_id/synthetic.hpp"
#include "manifold_id/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace manifold_id;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing

std::string single_line(std::string text) {
    std::replace(text.begin(), text.end(), '\n', ' ');
    std::replace(text.begin(), text.end(), '\r', ' ');
    return text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out.good()) throw IoError("write failure on " + path.string());
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string file_digest(const fs::path& path) {
    std::ostringstream out;
    out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0')
        << fnv1a64(read_text(path));
    return out.str();
}

std::string fmt_num(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

// Written next to every artifact set; re-running the recorded subcommand with
// the recorded config reproduces the artifacts bit-for-bit.
void write_manifest(const fs::path& out_prefix, const std::string& subcommand,
                    const json& config, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& artifacts) {
    json m;
    m["subcommand"] = subcommand;
    m["config"] = config;
    json digests = json::object();
    for (const fs::path& p : inputs) digests[p.string()] = file_digest(p);
    m["inputs"] = digests;
    json arts = json::array();
    for (const fs::path& a : artifacts) arts.push_back(a.string());
    m["artifacts"] = arts;
    fs::path path = out_prefix;
    path += ".manifest.json";
    write_text(path, m.dump(2) + "\n");
}

json load_json_file(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

fs::path with_suffix(const fs::path& prefix, const std::string& suffix) {
    fs::path p = prefix;
    p += suffix;
    return p;
}

// ---------------------------------------------------------------------------
// config schemas

SyntheticSpec spec_from_json(const json& j) {
    SyntheticSpec spec;
    try {
        spec.seed = j.value("seed", std::uint64_t{0});
        if (!j.contains("classes") || !j.at("classes").is_array() || j.at("classes").empty())
            throw FormatError("synth config needs a nonempty 'classes' array");
        for (const json& cj : j.at("classes")) {
            ClassSpec c;
            c.intrinsic_dim = cj.at("intrinsic_dim").get<int>();
            c.ambient_dim = cj.at("ambient_dim").get<int>();
            c.samples = cj.at("samples").get<int>();
            c.noise_sigma = cj.value("noise_sigma", 0.0);
            c.kind = manifold_kind_from_string(cj.value("kind", "linear-gaussian"));
            spec.classes.push_back(c);
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("synth config: ") + e.what());
    }
    return spec;
}

json spec_to_json(const SyntheticSpec& spec) {
    json classes = json::array();
    for (const ClassSpec& c : spec.classes)
        classes.push_back({{"intrinsic_dim", c.intrinsic_dim},
                           {"ambient_dim", c.ambient_dim},
                           {"samples", c.samples},
                           {"noise_sigma", c.noise_sigma},
                           {"kind", to_string(c.kind)}});
    return {{"seed", spec.seed}, {"classes", classes}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    try {
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("hidden_sizes"))
            cfg.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
        cfg.snapshot_every = j.value("snapshot_every", cfg.snapshot_every);
        if (j.contains("idr") && !j.at("idr").is_null()) {
            const json& ij = j.at("idr");
            IdrConfig ic;
            ic.alpha = ij.at("alpha").get<double>();
            ic.warmup_epochs = ij.value("warmup_epochs", ic.warmup_epochs);
            ic.smooth = ij.value("smooth", ic.smooth);
            cfg.idr = ic;
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("train config: ") + e.what());
    }
    return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
    json j = {{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"seed", cfg.seed},
              {"hidden_sizes", cfg.hidden_sizes},
              {"snapshot_every", cfg.snapshot_every}};
    if (cfg.idr)
        j["idr"] = {{"alpha", cfg.idr->alpha},
                    {"warmup_epochs", cfg.idr->warmup_epochs},
                    {"smooth", cfg.idr->smooth},
                    {"batch_size", cfg.idr->batch_size}};
    else
        j["idr"] = nullptr;
    return j;
}

std::vector<double> read_accuracies(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<double> acc;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        try {
            std::size_t used = 0;
            double v = std::stod(line, &used);
            if (used != line.size()) throw std::invalid_argument(line);
            acc.push_back(v);
        } catch (const std::exception&) {
            throw FormatError(path.string() + ": line " + std::to_string(lineno) +
                              ": not a number: '" + line + "'");
        }
    }
    if (acc.empty()) throw FormatError(path.string() + ": no accuracy values");
    return acc;
}

// ---------------------------------------------------------------------------
// subcommands

struct SynthArgs {
    fs::path config;
    fs::path out;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void run_synth(const SynthArgs& a) {
    SyntheticSpec spec = spec_from_json(load_json_file(a.config));
    if (a.seed_given) spec.seed = a.seed;
    LabeledEmbeddings data = generate_synthetic(spec);
    fs::path emb = with_suffix(a.out, ".emb1");
    fs::path lab = with_suffix(a.out, ".labels");
    write_embeddings(data.embeddings, emb);
    write_labels(data.labels, lab);
    write_manifest(a.out, "synth", spec_to_json(spec), {a.config}, {emb, lab});
    std::cout << "wrote " << emb.string() << " (" << data.sample_count() << " x "
              << data.dim() << ") and " << lab.string() << "\n";
}

struct EstimateArgs {
    fs::path embeddings;
    fs::path labels;
    std::string method = "tle";
    int k = 20;
    bool centered = false;
    bool per_class = false;
    int threads = 1;
    fs::path out;
};

json estimate_to_json(const IdEstimate& est, bool centered) {
    json j;
    j["value"] = est.value;
    j["method"] = to_string(est.method);
    j["k"] = est.k;
    j["sample_count"] = est.sample_count;
    j["excluded_count"] = est.excluded_count;
    j["quality_warning"] = est.quality_warning;
    if (est.method == IdMethod::Pr) j["centered"] = centered;
    return j;
}

void run_estimate(const EstimateArgs& a) {
    IdMethod method = id_method_from_string(a.method);
    if (a.centered && method != IdMethod::Pr)
        throw InvalidArgument("--centered applies to the pr method only");
    EmbeddingMatrix Z = read_embeddings(a.embeddings);

    auto estimate_one = [&](const EmbeddingMatrix& M) {
        if (method == IdMethod::Pr) {
            IdEstimate est;
            est.value = pr_from_embeddings(M, a.centered);
            est.method = IdMethod::Pr;
            est.sample_count = M.rows();
            return est;
        }
        return global_id(M, a.k, method, a.threads);
    };

    std::vector<fs::path> inputs = {a.embeddings};
    json out;
    if (a.per_class) {
        if (a.labels.empty())
            throw InvalidArgument("--per-class needs --labels");
        LabeledEmbeddings data;
        data.embeddings = std::move(Z);
        data.labels = read_labels(a.labels);
        data.class_count =
            data.labels.empty() ? 0 : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
        data.validate();
        inputs.push_back(a.labels);
        std::vector<EmbeddingMatrix> per_class = partition_by_class(data);
        json classes = json::array();
        for (std::size_t c = 0; c < per_class.size(); ++c) {
            json e = estimate_to_json(estimate_one(per_class[c]), a.centered);
            e["class"] = c;
            classes.push_back(std::move(e));
        }
        out["classes"] = std::move(classes);
    } else {
        out = estimate_to_json(estimate_one(Z), a.centered);
    }

    std::cout << out.dump(2) << "\n";
    if (!a.out.empty()) {
        fs::path file = with_suffix(a.out, ".estimate.json");
        write_text(file, out.dump(2) + "\n");
        json cfg = {{"embeddings", a.embeddings.string()}, {"method", a.method},
                    {"k", a.k},                            {"centered", a.centered},
                    {"per_class", a.per_class},            {"threads", a.threads}};
        if (!a.labels.empty()) cfg["labels"] = a.labels.string();
        write_manifest(a.out, "estimate", cfg, inputs, {file});
    }
}

struct AnalyzeArgs {
    std::vector<fs::path> embeddings;  // fairness mode, one file per class
    fs::path accuracies;
    std::vector<fs::path> layers;  // profile mode, ordered snapshots
    std::string method = "pr";
    int k = 20;
    bool centered = false;
    fs::path out;
};

void run_analyze(const AnalyzeArgs& a) {
    IdMethod method = id_method_from_string(a.method);
    if (a.centered && method != IdMethod::Pr)
        throw InvalidArgument("--centered applies to the pr method only");
    json cfg = {{"method", a.method}, {"k", a.k}, {"centered", a.centered}};

    if (!a.layers.empty()) {
        std::vector<IdEstimate> profile = layer_profile(a.layers, a.k, method, a.centered);
        json rows = json::array();
        std::ostringstream csv;
        csv << std::setprecision(17)
            << "layer,file,value,method,k,sample_count,excluded_count,quality_warning\n";
        for (std::size_t i = 0; i < profile.size(); ++i) {
            json e = estimate_to_json(profile[i], a.centered);
            e["layer"] = i;
            e["file"] = a.layers[i].string();
            rows.push_back(std::move(e));
            csv << i << ',' << a.layers[i].string() << ',' << profile[i].value << ','
                << to_string(profile[i].method) << ',' << profile[i].k << ','
                << profile[i].sample_count << ',' << profile[i].excluded_count << ','
                << (profile[i].quality_warning ? 1 : 0) << '\n';
        }
        json out;
        out["profile"] = std::move(rows);
        std::cout << out.dump(2) << "\n";
        if (!a.out.empty()) {
            fs::path jf = with_suffix(a.out, ".profile.json");
            fs::path cf = with_suffix(a.out, ".profile.csv");
            write_text(jf, out.dump(2) + "\n");
            write_text(cf, csv.str());
            json lcfg = cfg;
            lcfg["layers"] = json::array();
            for (const fs::path& p : a.layers) lcfg["layers"].push_back(p.string());
            write_manifest(a.out, "analyze", lcfg, a.layers, {jf, cf});
        }
        return;
    }

    if (a.embeddings.empty())
        throw InvalidArgument("analyze needs --embeddings (fairness) or --layers (profile)");
    if (a.accuracies.empty()) throw InvalidArgument("fairness mode needs --accuracies");
    if (a.out.empty()) throw InvalidArgument("fairness mode needs --out");

    std::vector<EmbeddingMatrix> per_class;
    per_class.reserve(a.embeddings.size());
    for (const fs::path& p : a.embeddings) per_class.push_back(read_embeddings(p));
    std::vector<double> acc = read_accuracies(a.accuracies);
    FairnessReport report = build_fairness_report(per_class, acc, method, a.k, a.centered);
    for (const fs::path& p : a.embeddings) report.sources.push_back(p.string());

    fs::path jf = with_suffix(a.out, ".report.json");
    fs::path cf = with_suffix(a.out, ".report.csv");
    write_fairness_report(report, jf, cf);
    std::cout << report_to_json(report);

    json fcfg = cfg;
    fcfg["embeddings"] = json::array();
    for (const fs::path& p : a.embeddings) fcfg["embeddings"].push_back(p.string());
    fcfg["accuracies"] = a.accuracies.string();
    std::vector<fs::path> inputs = a.embeddings;
    inputs.push_back(a.accuracies);
    write_manifest(a.out, "analyze", fcfg, inputs, {jf, cf});
}

struct TrainArgs {
    fs::path features;
    fs::path labels;
    fs::path config;
    fs::path out;
    int epochs = 0;
    int batch_size = 0;
    double learning_rate = 0.0;
    std::uint64_t seed = 0;
    std::vector<int> hidden_sizes;
    int snapshot_every = -1;
    double idr_alpha = 0.0;
    int idr_warmup = -1;
    bool idr_hard = false;
    bool epochs_given = false, batch_given = false, lr_given = false, seed_given = false,
         snapshot_given = false, alpha_given = false, warmup_given = false;
};

void run_train(const TrainArgs& a) {
    TrainConfig cfg;
    if (!a.config.empty()) cfg = train_config_from_json(load_json_file(a.config));
    if (a.epochs_given) cfg.epochs = a.epochs;
    if (a.batch_given) cfg.batch_size = a.batch_size;
    if (a.lr_given) cfg.learning_rate = a.learning_rate;
    if (a.seed_given) cfg.seed = a.seed;
    if (!a.hidden_sizes.empty()) cfg.hidden_sizes = a.hidden_sizes;
    if (a.snapshot_given) cfg.snapshot_every = a.snapshot_every;
    if (a.alpha_given) {
        if (!cfg.idr) cfg.idr = IdrConfig{};
        cfg.idr->alpha = a.idr_alpha;
    }
    if (a.warmup_given || a.idr_hard) {
        if (!cfg.idr)
            throw InvalidArgument("IDR flags need --idr-alpha or an 'idr' config block");
        if (a.warmup_given) cfg.idr->warmup_epochs = a.idr_warmup;
        if (a.idr_hard) cfg.idr->smooth = false;
    }
    cfg.validate();

    LabeledEmbeddings data;
    data.embeddings = read_embeddings(a.features);
    data.labels = read_labels(a.labels);
    data.class_count =
        data.labels.empty() ? 0 : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
    data.validate();

    std::vector<fs::path> artifacts;
    SnapshotFn on_snapshot;
    if (cfg.snapshot_every > 0) {
        on_snapshot = [&](int epoch, const MlpModel&, const EmbeddingMatrix& emb) {
            std::ostringstream name;
            name << ".epoch" << std::setw(4) << std::setfill('0') << epoch << ".emb1";
            fs::path file = with_suffix(a.out, name.str());
            write_embeddings(emb, file);
            artifacts.push_back(file);
        };
    }

    TrainResult result = train(data, cfg, on_snapshot);

    fs::path model_file = with_suffix(a.out, ".model.json");
    fs::path log_json = with_suffix(a.out, ".trainlog.json");
    fs::path log_csv = with_suffix(a.out, ".trainlog.csv");
    write_text(model_file, model_to_json(result.model));
    write_text(log_json, train_log_to_json(result.log));
    write_text(log_csv, train_log_to_csv(result.log));
    artifacts.insert(artifacts.begin(), {model_file, log_json, log_csv});

    json cfg_json = train_config_to_json(cfg);
    cfg_json["features"] = a.features.string();
    cfg_json["labels"] = a.labels.string();
    write_manifest(a.out, "train", cfg_json, {a.features, a.labels}, artifacts);

    if (result.log.epochs.empty()) {
        std::cout << "trained 0 epochs; wrote the initial model\n";
    } else {
        const EpochRecord& last = result.log.epochs.back();
        std::cout << "epoch " << last.epoch << ": loss " << fmt_num(last.train_loss)
                  << ", accuracy " << fmt_num(last.overall_accuracy) << "\n";
    }
}

struct ReportArgs {
    fs::path log;
    fs::path baseline;
    fs::path out;
};

void run_report(const ReportArgs& a) {
    TrainLog log = train_log_from_json(read_text(a.log));
    std::vector<fs::path> inputs = {a.log};
    std::vector<fs::path> artifacts;

    fs::path id_csv = with_suffix(a.out, ".id_vs_epoch.csv");
    fs::path ifid_csv = with_suffix(a.out, ".ifid_vs_epoch.csv");
    std::ostringstream id_out, ifid_out;
    id_out << "epoch,dataset_pr\n";
    ifid_out << "epoch,if_id\n";
    for (const EpochRecord& r : log.epochs) {
        id_out << r.epoch << ',' << fmt_num(r.dataset_pr) << '\n';
        ifid_out << r.epoch << ',' << fmt_num(r.if_id) << '\n';
    }
    write_text(id_csv, id_out.str());
    write_text(ifid_csv, ifid_out.str());
    artifacts = {id_csv, ifid_csv};

    json cfg = {{"log", a.log.string()}};
    if (!a.baseline.empty()) {
        TrainLog base = train_log_from_json(read_text(a.baseline));
        if (base.epochs.size() != log.epochs.size())
            throw DataError("baseline has " + std::to_string(base.epochs.size()) +
                            " epochs, log has " + std::to_string(log.epochs.size()));
        fs::path cmp_csv = with_suffix(a.out, ".accstd_compare.csv");
        std::ostringstream cmp;
        cmp << "epoch,acc_std_baseline,acc_std_run\n";
        for (std::size_t e = 0; e < log.epochs.size(); ++e)
            cmp << log.epochs[e].epoch << ',' << fmt_num(base.epochs[e].acc_std) << ','
                << fmt_num(log.epochs[e].acc_std) << '\n';
        write_text(cmp_csv, cmp.str());
        artifacts.push_back(cmp_csv);
        inputs.push_back(a.baseline);
        cfg["baseline"] = a.baseline.string();
    }
    write_manifest(a.out, "report", cfg, inputs, artifacts);
    std::cout << "wrote " << artifacts.size() << " trajectory files\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"intrinsic-dimension estimation, fairness analysis, and IDR training "
                 "for embedding point clouds"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* sc_synth = app.add_subcommand("synth", "generate labeled synthetic manifolds");
    sc_synth->add_option("--config", synth.config, "JSON spec: seed, classes[]")
        ->required();
    sc_synth->add_option("--seed", synth.seed, "override the config seed");
    sc_synth->add_option("--out", synth.out, "output path prefix")->required();

    EstimateArgs est;
    auto* sc_est = app.add_subcommand("estimate", "estimate intrinsic dimension");
    sc_est->add_option("--embeddings", est.embeddings, "EMB1 or CSV embedding file")
        ->required();
    sc_est->add_option("--labels", est.labels, "label file (enables --per-class)");
    sc_est->add_option("--method", est.method, "mle | tle | pr")->required();
    sc_est->add_option("--k", est.k, "neighborhood size (mle/tle)");
    sc_est->add_flag("--centered", est.centered, "center before PR");
    sc_est->add_flag("--per-class", est.per_class, "one estimate per class");
    sc_est->add_option("--threads", est.threads, "worker threads (default 1)")
        ->envname("MANIFOLD_ID_THREADS");
    sc_est->add_option("--out", est.out, "also write <out>.estimate.json and a manifest");

    AnalyzeArgs ana;
    auto* sc_ana = app.add_subcommand("analyze", "fairness report or layer profile");
    auto* ana_emb = sc_ana->add_option("--embeddings", ana.embeddings,
                                       "per-class embedding files, class order");
    sc_ana->add_option("--accuracies", ana.accuracies, "per-class accuracies, one per line");
    auto* ana_layers =
        sc_ana->add_option("--layers", ana.layers, "ordered snapshot files to profile");
    ana_layers->excludes(ana_emb);
    sc_ana->add_option("--method", ana.method, "mle | tle | pr (default pr)");
    sc_ana->add_option("--k", ana.k, "neighborhood size (mle/tle)");
    sc_ana->add_flag("--centered", ana.centered, "center before PR");
    sc_ana->add_option("--out", ana.out, "output path prefix");

    TrainArgs tr;
    auto* sc_tr = app.add_subcommand("train", "train an MLP classifier, optionally with IDR");
    sc_tr->add_option("--features", tr.features, "EMB1 or CSV feature file")->required();
    sc_tr->add_option("--labels", tr.labels, "label file")->required();
    sc_tr->add_option("--config", tr.config, "TrainConfig JSON; flags override");
    sc_tr->add_option("--out", tr.out, "output path prefix")->required();
    auto* o_epochs = sc_tr->add_option("--epochs", tr.epochs);
    auto* o_batch = sc_tr->add_option("--batch-size", tr.batch_size);
    auto* o_lr = sc_tr->add_option("--learning-rate", tr.learning_rate);
    auto* o_seed = sc_tr->add_option("--seed", tr.seed);
    sc_tr->add_option("--hidden-sizes", tr.hidden_sizes, "hidden layer widths");
    auto* o_snap = sc_tr->add_option("--snapshot-every", tr.snapshot_every,
                                     "dump train-split embeddings every N epochs");
    auto* o_alpha = sc_tr->add_option("--idr-alpha", tr.idr_alpha, "IDR schedule base (> 1)");
    auto* o_warm = sc_tr->add_option("--idr-warmup", tr.idr_warmup, "IDR warm-up epochs");
    sc_tr->add_flag("--idr-hard", tr.idr_hard, "use the hard L_ID instead of the smooth one");

    ReportArgs rep;
    auto* sc_rep = app.add_subcommand("report", "trajectory CSVs from train logs");
    sc_rep->add_option("--log", rep.log, "train log JSON")->required();
    sc_rep->add_option("--baseline", rep.baseline, "baseline train log for the acc-std comparison");
    sc_rep->add_option("--out", rep.out, "output path prefix")->required();

    try {
        app.parse(argc, argv);
        if (*sc_synth) {
            synth.seed_given = sc_synth->count("--seed") > 0;
            run_synth(synth);
        } else if (*sc_est) {
            run_estimate(est);
        } else if (*sc_ana) {
            run_analyze(ana);
        } else if (*sc_tr) {
            tr.epochs_given = o_epochs->count() > 0;
            tr.batch_given = o_batch->count() > 0;
            tr.lr_given = o_lr->count() > 0;
            tr.seed_given = o_seed->count() > 0;
            tr.snapshot_given = o_snap->count() > 0;
            tr.alpha_given = o_alpha->count() > 0;
            tr.warmup_given = o_warm->count() > 0;
            run_train(tr);
        } else if (*sc_rep) {
            run_report(rep);
        }
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << single_line(e.what()) << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << single_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
