#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "comove/csv.hpp"
#include "comove/evaluation.hpp"
#include "comove/evolving_clusters.hpp"
#include "comove/flp.hpp"
#include "comove/pipeline.hpp"
#include "comove/preprocess.hpp"
#include "comove/report_io.hpp"
#include "comove/synth.hpp"

namespace {

using namespace comove;

SimWeights parse_lambdas(const std::string& text) {
    SimWeights w;
    std::stringstream ss(text);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
        throw std::invalid_argument("--lambdas expects three comma-separated values");
    }
    w.lambda1 = std::stod(a);
    w.lambda2 = std::stod(b);
    w.lambda3 = std::stod(c);
    w.validate();
    return w;
}

DetectionMode parse_mode(const std::string& text) {
    if (text == "mc") return DetectionMode::MC;
    if (text == "mcs") return DetectionMode::MCS;
    if (text == "both") return DetectionMode::Both;
    throw std::invalid_argument("--mode must be mc, mcs or both");
}

double parse_speed(const std::string& text) {
    if (text == "max") return 0.0;
    const double v = std::stod(text);
    if (!(v > 0.0)) {
        throw std::invalid_argument("--speed must be a positive multiplier or 'max'");
    }
    return v;
}

std::vector<TimeSlice> slices_from_records(const std::vector<TimestampedPoint>& records) {
    std::map<double, TimeSlice> by_t;
    for (const auto& p : records) {
        TimeSlice& ts = by_t[p.t];
        ts.t = p.t;
        ts.positions[p.object_id] = LonLat{p.lon, p.lat};
    }
    std::vector<TimeSlice> out;
    out.reserve(by_t.size());
    for (auto& [t, ts] : by_t) {
        out.push_back(std::move(ts));
    }
    return out;
}

PositionStore store_from_csv(const std::string& path) {
    PositionStore store;
    for (const auto& p : read_points_csv(path).records) {
        store.add(p.t, p.object_id, LonLat{p.lon, p.lat});
    }
    return store;
}

std::string group_list_help() {
    return "comma-separated group specs members:radius_m:t_start:t_end:motion "
           "(motion: linear|arc|random-walk)";
}

int cmd_preprocess(const std::string& input, const std::string& output, PreprocessConfig cfg,
                   double epoch_flag, bool epoch_set) {
    cfg.validate();
    CsvReadResult in = read_points_csv(input);
    sort_records(in.records);
    const double epoch = epoch_set
                             ? epoch_flag
                             : (in.records.empty() ? 0.0 : default_epoch(in.records.front().t));
    std::vector<TimestampedPoint> out_records;
    std::size_t trajectories = 0;
    for (const auto& raw : group_by_object(in.records)) {
        for (const auto& aligned : preprocess_trajectory(raw, cfg, epoch)) {
            ++trajectories;
            out_records.insert(out_records.end(), aligned.points.begin(), aligned.points.end());
        }
    }
    sort_records(out_records);
    write_points_csv(output, out_records);
    std::cerr << "preprocess: " << in.records.size() << " records in, " << out_records.size()
              << " aligned points out, " << trajectories << " trajectories, " << in.malformed
              << " malformed lines skipped\n";
    return 0;
}

int cmd_train(const std::string& input, const std::string& model_out, const std::string& loss_out,
              double horizon, PredictorConfig cfg) {
    cfg.validate();
    CsvReadResult in = read_points_csv(input);
    sort_records(in.records);
    const auto trajs = group_by_object(in.records);
    const auto dataset = make_training_set(trajs, cfg.window_len, horizon);
    if (dataset.empty()) {
        throw std::invalid_argument(
            "no training samples: input too short for window and horizon");
    }
    std::cerr << "train: " << dataset.size() << " samples from " << trajs.size() << " objects\n";
    TrainResult result = train_bptt(dataset, cfg);
    save_model(model_out, Model{result.params, result.stats, cfg.window_len});
    if (!loss_out.empty()) {
        std::ostringstream loss;
        loss << "epoch,loss\n";
        for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
            loss << e << ',' << result.loss_history[e] << '\n';
        }
        write_text_file(loss_out, loss.str());
    }
    std::cerr << "train: final loss " << result.loss_history.back() << ", model written to "
              << model_out << "\n";
    return 0;
}

int cmd_predict(const std::string& input, const std::string& model_path, double horizon,
                const std::string& output) {
    const Model model = load_model(model_path);
    CsvReadResult in = read_points_csv(input);
    sort_records(in.records);
    std::vector<TimestampedPoint> predictions;
    for (const auto& traj : group_by_object(in.records)) {
        if (traj.points.empty()) continue;
        predictions.push_back(
            predict_location(traj, horizon, model.params, model.stats, model.window_len));
    }
    std::ostringstream out;
    out << "object_id,t_pred,lon,lat\n";
    for (const auto& p : predictions) {
        out << p.object_id << ',' << format_time(p.t) << ',' << format_coord(p.lon) << ','
            << format_coord(p.lat) << '\n';
    }
    write_text_file(output, out.str());
    std::cerr << "predict: " << predictions.size() << " objects, " << in.malformed
              << " malformed lines skipped\n";
    return 0;
}

int cmd_detect(const std::string& input, DetectionParams params, const std::string& output,
               const std::string& jsonl_out, const std::string& provisional_out) {
    params.progressive = !provisional_out.empty();
    params.validate();
    CsvReadResult in = read_points_csv(input);
    sort_records(in.records);
    ClusterDetector detector(params);
    std::vector<EvolvingCluster> clusters;
    for (const auto& ts : slices_from_records(in.records)) {
        auto emitted = detector.step(ts);
        clusters.insert(clusters.end(), emitted.begin(), emitted.end());
    }
    auto tail = detector.flush();
    clusters.insert(clusters.end(), tail.begin(), tail.end());
    write_clusters_csv(output, clusters);
    if (!jsonl_out.empty()) {
        write_clusters_jsonl(jsonl_out, clusters);
    }
    if (!provisional_out.empty()) {
        write_clusters_csv(provisional_out, detector.take_provisional());
    }
    std::cerr << "detect: " << clusters.size() << " clusters, " << in.malformed
              << " malformed lines skipped\n";
    return 0;
}

int cmd_evaluate(const std::string& pred_clusters, const std::string& act_clusters,
                 const std::string& pred_positions, const std::string& act_positions,
                 const SimWeights& weights, double align_rate, SpatialMode spatial,
                 const std::string& out_dir) {
    const auto predicted = read_clusters_csv(pred_clusters);
    const auto actual = read_clusters_csv(act_clusters);
    const PositionStore pred_store = store_from_csv(pred_positions);
    const PositionStore act_store = store_from_csv(act_positions);
    const MatchReport report = cluster_matching(predicted, actual, weights, pred_store, act_store,
                                                align_rate, spatial);
    const MatchSummary summary = summarize(report);
    write_matches_csv(out_dir + "/matches.csv", report);
    write_text_file(out_dir + "/summary.json", match_summary_json(summary));
    std::cerr << "evaluate: " << report.pairs.size() << " matched, "
              << report.unmatched_predicted.size() << " unmatched";
    if (summary.overall) {
        std::cerr << ", median Sim* " << summary.overall->median;
    }
    std::cerr << "\n";
    return 0;
}

int cmd_run(const PipelineConfig& cfg, const std::string& input, const std::string& out_dir,
            bool geojson) {
    const CsvRunResult result = run_online_csv(cfg, input);
    const RunResult& run = result.run;
    write_clusters_csv(out_dir + "/actual_clusters.csv", run.actual);
    write_clusters_csv(out_dir + "/predicted_clusters.csv", run.predicted);
    write_matches_csv(out_dir + "/matches.csv", run.report);
    write_text_file(out_dir + "/metrics.json", metrics_json(run.metrics, run.summary));
    if (geojson) {
        write_text_file(out_dir + "/clusters.geojson",
                        clusters_geojson(run.actual, run.actual_positions, cfg.align_rate_s));
    }
    std::cerr << "run: " << run.actual.size() << " actual clusters, " << run.predicted.size()
              << " predicted clusters, " << run.report.pairs.size() << " matched";
    if (run.summary.overall) {
        std::cerr << ", median Sim* " << run.summary.overall->median;
    }
    std::cerr << "\n";
    return 0;
}

int cmd_synth(const SynthScenario& scenario, const std::string& out_csv,
              const std::string& truth_out, const std::string& scenario_out) {
    const SynthResult result = generate(scenario);
    write_points_csv(out_csv, result.records);
    if (!truth_out.empty()) {
        write_clusters_csv(truth_out, result.truth);
    }
    if (!scenario_out.empty()) {
        write_text_file(scenario_out, scenario_to_json(scenario));
    }
    std::cerr << "synth: " << result.records.size() << " records for " << scenario.n_objects
              << " objects, " << result.truth.size() << " scripted groups\n";
    return 0;
}

std::vector<GroupSpec> parse_group_list(const std::string& text) {
    std::vector<GroupSpec> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::stringstream gs(item);
        std::string members, radius, t0, t1, motion;
        if (!std::getline(gs, members, ':') || !std::getline(gs, radius, ':') ||
            !std::getline(gs, t0, ':') || !std::getline(gs, t1, ':') ||
            !std::getline(gs, motion)) {
            throw std::invalid_argument("bad group spec '" + item + "'; expected " +
                                        group_list_help());
        }
        GroupSpec g;
        g.members = std::stoi(members);
        g.radius_m = std::stod(radius);
        g.t_start = std::stod(t0);
        g.t_end = std::stod(t1);
        g.motion = motion == "linear"        ? MotionModel::Linear
                   : motion == "arc"         ? MotionModel::Arc
                   : motion == "random-walk" ? MotionModel::RandomWalk
                                             : throw std::invalid_argument("unknown motion '" +
                                                                           motion + "'");
        out.push_back(g);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"comove: online co-movement pattern prediction engine"};
    app.require_subcommand(1);

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "cleanse and align a raw point CSV");
    std::string pre_in, pre_out;
    PreprocessConfig pre_cfg;
    double pre_epoch = 0.0;
    pre->add_option("--input", pre_in, "raw CSV (object_id,timestamp,lon,lat)")->required();
    pre->add_option("--out", pre_out, "aligned CSV output")->required();
    pre->add_option("--speed-max", pre_cfg.speed_max_kn, "speed outlier threshold, knots");
    pre->add_option("--gap-dt", pre_cfg.gap_dt_s, "trajectory gap threshold, seconds");
    pre->add_option("--stop-speed", pre_cfg.stop_speed_kn, "stop point threshold, knots");
    pre->add_option("--align-rate", pre_cfg.align_rate_s, "alignment grid step, seconds");
    auto* pre_epoch_opt = pre->add_option("--epoch", pre_epoch, "grid origin, unix seconds");

    // train
    auto* train = app.add_subcommand("train", "train the GRU future-location model");
    std::string train_in, train_model, train_loss;
    double train_horizon = 300.0;
    PredictorConfig train_cfg;
    train->add_option("--input", train_in, "aligned CSV")->required();
    train->add_option("--model-out", train_model, "model file output")->required();
    train->add_option("--loss-out", train_loss, "per-epoch loss CSV");
    train->add_option("--delta-t", train_horizon, "prediction horizon, seconds");
    train->add_option("--window", train_cfg.window_len, "input window length, steps");
    train->add_option("--hidden", train_cfg.hidden_size, "GRU hidden units");
    train->add_option("--dense", train_cfg.dense_size, "dense layer units");
    train->add_option("--epochs", train_cfg.epochs, "training epochs");
    train->add_option("--batch", train_cfg.batch_size, "mini-batch size");
    train->add_option("--lr", train_cfg.learning_rate, "Adam learning rate");
    train->add_option("--seed", train_cfg.rng_seed, "RNG seed");

    // predict
    auto* predict = app.add_subcommand("predict", "predict each object's future location");
    std::string prd_in, prd_model, prd_out;
    double prd_horizon = 300.0;
    predict->add_option("--input", prd_in, "aligned CSV")->required();
    predict->add_option("--model", prd_model, "model file")->required();
    predict->add_option("--delta-t", prd_horizon, "prediction horizon, seconds");
    predict->add_option("--out", prd_out, "predicted point CSV")->required();

    // detect
    auto* detect = app.add_subcommand("detect", "evolving-cluster detection on aligned points");
    std::string det_in, det_out, det_jsonl, det_prov, det_mode = "both";
    DetectionParams det_params;
    detect->add_option("--input", det_in, "aligned CSV")->required();
    detect->add_option("--out", det_out, "cluster CSV output")->required();
    detect->add_option("--jsonl", det_jsonl, "optional JSON-lines output");
    detect->add_option("--provisional", det_prov, "optional provisional-pattern CSV");
    detect->add_option("--c", det_params.c, "minimum cardinality");
    detect->add_option("--theta", det_params.theta_m, "distance threshold, meters");
    detect->add_option("--d", det_params.d, "minimum duration, timeslices");
    detect->add_option("--align-rate", det_params.grid_step_s, "grid step, seconds");
    detect->add_option("--mode", det_mode, "mc|mcs|both");
    detect->add_option("--max-cliques", det_params.max_cliques, "clique enumeration guard");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "match predicted vs actual clusters");
    std::string ev_pred, ev_act, ev_pred_pos, ev_act_pos, ev_out = ".", ev_lambdas = "";
    std::string ev_spatial = "lifetime";
    double ev_rate = 60.0;
    eval->add_option("--pred-clusters", ev_pred, "predicted clusters CSV")->required();
    eval->add_option("--act-clusters", ev_act, "actual clusters CSV")->required();
    eval->add_option("--pred-positions", ev_pred_pos, "predicted positions CSV")->required();
    eval->add_option("--act-positions", ev_act_pos, "actual positions CSV")->required();
    eval->add_option("--lambdas", ev_lambdas, "similarity weights l1,l2,l3");
    eval->add_option("--align-rate", ev_rate, "grid step, seconds");
    eval->add_option("--spatial", ev_spatial, "lifetime|per-slice box overlap");
    eval->add_option("--out-dir", ev_out, "output directory");

    // run
    auto* run = app.add_subcommand("run", "full online prediction pipeline");
    std::string run_in, run_model, run_predictor = "cv", run_mode = "both", run_lambdas = "",
                run_speed = "max", run_out = ".";
    bool run_geojson = false;
    PipelineConfig run_cfg;
    double run_epoch = 0.0;
    run->add_option("--input", run_in, "point CSV")->required();
    run->add_option("--model", run_model, "model file (gru predictor)");
    run->add_option("--predictor", run_predictor, "gru|cv");
    run->add_option("--delta-t", run_cfg.delta_t_s, "lookahead, seconds");
    run->add_option("--align-rate", run_cfg.align_rate_s, "grid step, seconds");
    run->add_option("--gap-dt", run_cfg.gap_dt_s, "gap threshold, seconds");
    run->add_option("--c", run_cfg.detect.c, "minimum cardinality");
    run->add_option("--theta", run_cfg.detect.theta_m, "distance threshold, meters");
    run->add_option("--d", run_cfg.detect.d, "minimum duration, timeslices");
    run->add_option("--mode", run_mode, "mc|mcs|both");
    run->add_option("--lambdas", run_lambdas, "similarity weights l1,l2,l3");
    run->add_option("--speed", run_speed, "replay multiplier or 'max'");
    run->add_option("--window", run_cfg.window_len, "predictor window, steps");
    run->add_option("--capacity", run_cfg.log_capacity, "message log capacity");
    run->add_option("--out-dir", run_out, "output directory");
    auto* run_epoch_opt = run->add_option("--epoch", run_epoch, "grid origin, unix seconds");
    run->add_flag("--geojson", run_geojson, "also write clusters.geojson");
    std::string run_config_path;
    run->add_option("--config", run_config_path, "JSON config; flags override its values");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic fleet with ground truth");
    std::string sy_scenario, sy_out, sy_truth, sy_groups, sy_scenario_out;
    SynthScenario sy;
    synth->add_option("--scenario", sy_scenario, "scenario JSON file");
    synth->add_option("--out", sy_out, "point CSV output")->required();
    synth->add_option("--truth-out", sy_truth, "ground-truth cluster CSV");
    synth->add_option("--emit-scenario", sy_scenario_out, "write the effective scenario JSON");
    synth->add_option("--objects", sy.n_objects, "object count");
    synth->add_option("--duration", sy.duration_s, "duration, seconds");
    synth->add_option("--rate", sy.sample_rate_s, "sample rate, seconds");
    synth->add_option("--noise-sigma", sy.noise_sigma_m, "position jitter, meters");
    synth->add_option("--seed", sy.rng_seed, "RNG seed");
    synth->add_option("--theta-ref", sy.theta_ref_m, "detectability reference theta, meters");
    synth->add_option("--groups", sy_groups, group_list_help());

    try {
        app.parse(argc, argv);

        if (pre->parsed()) {
            return cmd_preprocess(pre_in, pre_out, pre_cfg, pre_epoch, pre_epoch_opt->count() > 0);
        }
        if (train->parsed()) {
            return cmd_train(train_in, train_model, train_loss, train_horizon, train_cfg);
        }
        if (predict->parsed()) {
            return cmd_predict(prd_in, prd_model, prd_horizon, prd_out);
        }
        if (detect->parsed()) {
            det_params.mode = parse_mode(det_mode);
            return cmd_detect(det_in, det_params, det_out, det_jsonl, det_prov);
        }
        if (eval->parsed()) {
            SimWeights w;
            if (!ev_lambdas.empty()) w = parse_lambdas(ev_lambdas);
            SpatialMode spatial;
            if (ev_spatial == "lifetime") {
                spatial = SpatialMode::Lifetime;
            } else if (ev_spatial == "per-slice") {
                spatial = SpatialMode::PerSlice;
            } else {
                throw std::invalid_argument("--spatial must be lifetime or per-slice");
            }
            return cmd_evaluate(ev_pred, ev_act, ev_pred_pos, ev_act_pos, w, ev_rate, spatial,
                                ev_out);
        }
        if (run->parsed()) {
            if (!run_config_path.empty()) {
                std::ifstream in(run_config_path);
                if (!in) {
                    throw std::runtime_error("cannot open config file: " + run_config_path);
                }
                std::stringstream buf;
                buf << in.rdbuf();
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(buf.str());
                } catch (const nlohmann::json::parse_error& e) {
                    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                                e.what());
                }
                // file values apply only where the flag was not given
                auto absent = [&](const char* flag) { return run->count(flag) == 0; };
                if (absent("--delta-t")) run_cfg.delta_t_s = j.value("delta_t", run_cfg.delta_t_s);
                if (absent("--align-rate"))
                    run_cfg.align_rate_s = j.value("align_rate", run_cfg.align_rate_s);
                if (absent("--gap-dt")) run_cfg.gap_dt_s = j.value("gap_dt", run_cfg.gap_dt_s);
                if (absent("--c")) run_cfg.detect.c = j.value("c", run_cfg.detect.c);
                if (absent("--theta")) run_cfg.detect.theta_m = j.value("theta", run_cfg.detect.theta_m);
                if (absent("--d")) run_cfg.detect.d = j.value("d", run_cfg.detect.d);
                if (absent("--mode")) run_mode = j.value("mode", run_mode);
                if (absent("--lambdas")) run_lambdas = j.value("lambdas", run_lambdas);
                if (absent("--speed")) run_speed = j.value("speed", run_speed);
                if (absent("--window")) run_cfg.window_len = j.value("window", run_cfg.window_len);
                if (absent("--predictor")) run_predictor = j.value("predictor", run_predictor);
                if (absent("--model")) run_model = j.value("model", run_model);
            }
            run_cfg.detect.mode = parse_mode(run_mode);
            if (!run_lambdas.empty()) run_cfg.weights = parse_lambdas(run_lambdas);
            run_cfg.speed = parse_speed(run_speed);
            run_cfg.model_path = run_model;
            if (run_predictor == "gru") {
                run_cfg.predictor = PredictorKind::Gru;
            } else if (run_predictor == "cv") {
                run_cfg.predictor = PredictorKind::ConstantVelocity;
            } else {
                throw std::invalid_argument("--predictor must be gru or cv");
            }
            if (run_epoch_opt->count() > 0) run_cfg.epoch = run_epoch;
            run_cfg.validate();
            return cmd_run(run_cfg, run_in, run_out, run_geojson);
        }
        if (synth->parsed()) {
            if (!sy_scenario.empty()) {
                std::ifstream in(sy_scenario);
                if (!in) {
                    throw std::runtime_error("cannot open scenario file: " + sy_scenario);
                }
                std::stringstream buf;
                buf << in.rdbuf();
                SynthScenario from_file = scenario_from_json(buf.str());
                // Explicit flags override file values.
                if (synth->count("--objects")) from_file.n_objects = sy.n_objects;
                if (synth->count("--duration")) from_file.duration_s = sy.duration_s;
                if (synth->count("--rate")) from_file.sample_rate_s = sy.sample_rate_s;
                if (synth->count("--noise-sigma")) from_file.noise_sigma_m = sy.noise_sigma_m;
                if (synth->count("--seed")) from_file.rng_seed = sy.rng_seed;
                if (synth->count("--theta-ref")) from_file.theta_ref_m = sy.theta_ref_m;
                sy = from_file;
            }
            if (!sy_groups.empty()) {
                sy.groups = parse_group_list(sy_groups);
            }
            return cmd_synth(sy, sy_out, sy_truth, sy_scenario_out);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
