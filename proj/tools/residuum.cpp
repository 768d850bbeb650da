/*
 * residuum - residual-limb termination for articulated body meshes.
 *
 * Copyright 2026 The residuum Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// residuum fit | eval | synth  -- see docs/cli.md.

#include "residuum/io.hpp"
#include "residuum/pipeline.hpp"
#include "residuum/synth.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using namespace residuum;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;

// Files are rendered in memory first and only then written, so a failure
// while loading or computing leaves the output directory untouched.
using Artifacts = std::vector<std::pair<std::string, std::string>>;

void write_artifacts(const fs::path& dir, const Artifacts& files)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    std::vector<fs::path> written;
    try {
        for (const auto& [name, data] : files) {
            io::detail::write_file(dir / name, data);
            written.push_back(dir / name);
        }
    } catch (...) {
        for (const fs::path& p : written) {
            fs::remove(p, ec);
        }
        throw;
    }
}

struct FitArgs {
    std::string body, keypoints, camera, out_dir;
    double lambda_min = 0.02;
    double lambda_max = 0.98;
    double accept_px = 15.0;
    std::optional<double> alpha, mu, margin, h;
    double shrink = kDefaultShrink;
    int threads = 1;
    std::uint64_t seed = 0;
};

int cmd_fit(const FitArgs& a)
{
    const BodyModel model = io::load_body(a.body);
    const KeypointSet2D keypoints = io::load_keypoints(a.keypoints);
    const PinholeCamera camera = io::load_camera(a.camera);

    FitOptions opt;
    opt.rafo.lambda_min = a.lambda_min;
    opt.rafo.lambda_max = a.lambda_max;
    opt.rafo.acceptance_threshold_px = a.accept_px;
    opt.rafo.alpha = a.alpha;
    opt.rafo.mu = a.mu;
    opt.rafo.threads = a.threads;
    opt.reconstruction.margin = a.margin;
    opt.reconstruction.h = a.h;
    opt.reconstruction.shrink = a.shrink;
    opt.seed = a.seed;
    RafoWeights{1.0, 1.0, a.lambda_min, a.lambda_max, a.accept_px}.validate();

    const FitResult fit = run_fit(model, keypoints, camera, opt);
    const Artifacts files = {
        {"mesh.obj", io::format_obj(fit.model.body.mesh())},
        {"body.json", io::detail::dump(io::body_to_json(fit.model))},
        {"joints.json", io::detail::dump(io::keypoints_to_json(fit.joints))},
        {"silhouette.pgm", io::format_pgm(fit.silhouette)},
        {"report.json", io::detail::dump(report_to_json(fit.report, opt))},
        {"timings.json", io::detail::dump(timings_to_json(fit.report))},
    };
    write_artifacts(a.out_dir, files);

    for (const LimbOutcome& o : fit.report.limbs) {
        std::cerr << to_string(o.limb) << ": " << to_string(o.status);
        if (o.error) {
            std::cerr << " (" << o.error->what() << ")";
        }
        std::cerr << "\n";
    }
    return fit.report.exit_code();
}

struct EvalArgs {
    std::string mesh, joints, gt_keypoints, gt_mask, camera;
    std::string baseline = "none";
};

int cmd_eval(const EvalArgs& a)
{
    const TriangleMesh mesh = io::load_mesh_obj(a.mesh);
    const KeypointSet2D pred = io::load_keypoints(a.joints);
    const KeypointSet2D gt = io::load_keypoints(a.gt_keypoints);
    const BinaryMask mask = io::load_mask(a.gt_mask);
    const PinholeCamera camera = io::load_camera(a.camera);
    if (mask.width() != camera.image_width() || mask.height() != camera.image_height()) {
        throw Error(ErrorCode::DimensionMismatch, "mask is " + std::to_string(mask.width()) + "x" +
                                                      std::to_string(mask.height()) + " but the camera image is " +
                                                      std::to_string(camera.image_width()) + "x" +
                                                      std::to_string(camera.image_height()));
    }
    const bool midpoint = a.baseline == "midpoint";
    const EvalReport report = evaluate(mesh, prediction_vector(pred, midpoint), gt, mask, camera);
    std::cout << format_eval_report(report, midpoint);
    return kExitOk;
}

struct SynthArgs {
    std::string spec, amputations, out_dir;
    double noise_px = 0.0;
    std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a)
{
    const SynthBodySpec spec = io::load_synth_spec(a.spec);
    const std::map<LimbId, double> amputations = io::load_amputations(a.amputations);
    const SynthScene scene = generate_scene(spec, amputations, {}, a.noise_px, a.seed);

    io::json truth;
    truth["schema_version"] = io::kSchemaVersion;
    truth["kind"] = "residuum.synth_truth";
    truth["noise_px"] = a.noise_px;
    truth["seed"] = a.seed;
    io::json lambdas = io::json::object();
    for (const auto& [limb, lambda] : scene.true_lambda) {
        lambdas[std::string(to_string(limb))] = lambda;
    }
    truth["lambda"] = std::move(lambdas);

    const Artifacts files = {
        {"body.json", io::detail::dump(io::body_to_json(scene.model))},
        {"keypoints.json", io::detail::dump(io::keypoints_to_json(scene.gt_keypoints))},
        {"camera.json", io::detail::dump(io::camera_to_json(scene.camera))},
        {"mask.pgm", io::format_pgm(scene.gt_mask)},
        {"truth.json", io::detail::dump(truth)},
        {"truth_mesh.obj", io::format_obj(scene.amputated_body.mesh())},
    };
    write_artifacts(a.out_dir, files);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"residuum: residual-limb termination for articulated body meshes"};
    app.require_subcommand(1);
    // `-h` is taken by the cap offset flag of `fit`.
    app.set_help_flag("--help", "print this help message and exit");

    FitArgs fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "refine residual limbs and seal their stumps");
    fit_cmd->add_option("body", fit.body, "body file (JSON)")->required();
    fit_cmd->add_option("keypoints", fit.keypoints, "observed keypoints (JSON)")->required();
    fit_cmd->add_option("camera", fit.camera, "camera file (JSON)")->required();
    fit_cmd->add_option("out_dir", fit.out_dir, "output directory")->required();
    fit_cmd->add_option("--lambda-min", fit.lambda_min, "lower bound on the residual factor")->capture_default_str();
    fit_cmd->add_option("--lambda-max", fit.lambda_max, "upper bound on the residual factor")->capture_default_str();
    fit_cmd->add_option("--accept-px", fit.accept_px, "acceptance threshold in pixels")->capture_default_str();
    fit_cmd->add_option("--alpha", fit.alpha, "fixed anchor-prior weight (default: adaptive)");
    fit_cmd->add_option("--mu", fit.mu, "fixed length-prior weight (default: adaptive)");
    fit_cmd->add_option("--margin", fit.margin, "cut band half-width in metres (default: auto)");
    fit_cmd->add_option("--h", fit.h, "cap ring offset in metres (default: auto)");
    fit_cmd->add_option("--shrink", fit.shrink, "cap ring shrink factor")->capture_default_str();
    fit_cmd->add_option("--threads", fit.threads, "per-limb worker threads")->capture_default_str()->check(
        CLI::PositiveNumber);
    fit_cmd->add_option("--seed", fit.seed, "recorded in the report")->capture_default_str();

    EvalArgs ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "2D MPJPE and silhouette mIoU against ground truth");
    eval_cmd->add_option("pred_mesh", ev.mesh, "predicted mesh (OBJ)")->required();
    eval_cmd->add_option("pred_joints", ev.joints, "predicted joints (keypoints JSON)")->required();
    eval_cmd->add_option("gt_keypoints", ev.gt_keypoints, "ground-truth keypoints (JSON)")->required();
    eval_cmd->add_option("gt_mask", ev.gt_mask, "ground-truth mask (PGM)")->required();
    eval_cmd->add_option("camera", ev.camera, "camera file (JSON)")->required();
    eval_cmd->add_option("--baseline", ev.baseline, "residual prediction: none or midpoint")
        ->check(CLI::IsMember({"none", "midpoint"}))
        ->capture_default_str();

    SynthArgs sy;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic amputee scene");
    synth_cmd->add_option("spec", sy.spec, "body spec (JSON)")->required();
    synth_cmd->add_option("amputations", sy.amputations, "amputation spec (JSON)")->required();
    synth_cmd->add_option("out_dir", sy.out_dir, "output directory")->required();
    synth_cmd->add_option("--noise-px", sy.noise_px, "keypoint noise std in pixels")->capture_default_str()->check(
        CLI::NonNegativeNumber);
    synth_cmd->add_option("--seed", sy.seed, "noise seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitFatal;
    }

    try {
        if (*fit_cmd) {
            return cmd_fit(fit);
        }
        if (*eval_cmd) {
            return cmd_eval(ev);
        }
        return cmd_synth(sy);
    } catch (const Error& e) {
        std::cerr << "residuum: " << e.what() << "\n";
        return kExitFatal;
    } catch (const std::exception& e) {
        std::cerr << "residuum: " << e.what() << "\n";
        return kExitFatal;
    }
}
