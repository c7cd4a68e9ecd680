// shapefeat: thickness, orientation and skeleton maps of binary images.
//
//   shapefeat analyze  <image> --extent-x 5 --h0 0.3 [--a 0.2] --out results/
//   shapefeat oracle1d --K 0 --L 1 --p 0.4 --h 0.2 --h0 0.2 --a 0.2
//   shapefeat validate [--only bars]

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shapefeat/features.hpp"
#include "shapefeat/image_io.hpp"
#include "shapefeat/oracle_1d.hpp"
#include "shapefeat/pde_solver.hpp"
#include "shapefeat/validate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shapefeat;

namespace {

enum ExitCode : int {
    exit_ok = 0,
    exit_validation_failed = 1,
    exit_input = 2,
    exit_format = 3,
    exit_convergence = 4,
    exit_io = 5,
    exit_numeric = 6,
};

int exit_code_for(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::input: return exit_input;
    case ErrorCategory::format: return exit_format;
    case ErrorCategory::convergence: return exit_convergence;
    case ErrorCategory::io: return exit_io;
    case ErrorCategory::definiteness:
    case ErrorCategory::numeric: return exit_numeric;
    }
    return exit_numeric;
}

struct RunConfig {
    std::string input;
    double extent_x = 0.0;
    double h0 = 0.0;
    double a = 0.2;
    int subdivisions = 0;  // 0: automatic
    double pad = -1.0;     // <0: automatic
    double tol = 1e-10;
    double skeleton_width = 0.0; // 0: automatic
    double orientation_eps = 1e-3;
    double threshold = 0.5;
    bool invert = false;
    std::string out = "shapefeat-out";
    std::vector<std::string> formats{"pgm", "csv"};

    void validate() const {
        if (input.empty()) throw InputError("no input image given");
        if (!(extent_x > 0.0)) throw InputError("--extent-x must be strictly positive");
        if (!(h0 > 0.0)) throw InputError("--h0 must be strictly positive");
        if (!(a > 0.0)) throw InputError("--a must be strictly positive (alpha = 4/a)");
        if (subdivisions < 0) throw InputError("--subdivisions must be >= 0");
        if (!(tol > 0.0 && tol < 1.0)) throw InputError("--tol must lie in (0,1)");
        if (skeleton_width < 0.0) throw InputError("--skeleton-width must be positive");
        if (!(orientation_eps > 0.0)) throw InputError("--orientation-eps must be positive");
        if (!(threshold > 0.0 && threshold < 1.0)) throw InputError("--threshold must lie in (0,1)");
        if (formats.empty()) throw InputError("--format needs at least one entry");
        for (const auto& f : formats) (void)parse_format(f);
    }

    json to_json() const {
        return {{"input", input},
                {"extent_x", extent_x},
                {"h0", h0},
                {"a", a},
                {"subdivisions", subdivisions},
                {"pad", pad},
                {"tol", tol},
                {"skeleton_width", skeleton_width},
                {"orientation_eps", orientation_eps},
                {"threshold", threshold},
                {"invert", invert},
                {"formats", formats}};
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        c.input = j.at("input").get<std::string>();
        c.extent_x = j.at("extent_x").get<double>();
        c.h0 = j.at("h0").get<double>();
        c.a = j.value("a", c.a);
        c.subdivisions = j.value("subdivisions", c.subdivisions);
        c.pad = j.value("pad", c.pad);
        c.tol = j.value("tol", c.tol);
        c.skeleton_width = j.value("skeleton_width", c.skeleton_width);
        c.orientation_eps = j.value("orientation_eps", c.orientation_eps);
        c.threshold = j.value("threshold", c.threshold);
        c.invert = j.value("invert", c.invert);
        c.formats = j.value("formats", c.formats);
        return c;
    }
};

int cmd_analyze(RunConfig cfg, const std::string& manifest_in) {
    if (!manifest_in.empty()) {
        std::ifstream in(manifest_in);
        if (!in) throw InputError("cannot open manifest " + manifest_in);
        json m;
        try {
            in >> m;
            const std::string out = cfg.out;
            cfg = RunConfig::from_json(m.at("config"));
            cfg.out = out;
        } catch (const json::exception& e) {
            throw InputError(std::string("malformed manifest: ") + e.what());
        }
    }
    cfg.validate();
    if (!fs::is_regular_file(cfg.input)) throw InputError("input image not found: " + cfg.input);

    const auto t0 = std::chrono::steady_clock::now();
    const PdeParameters params(cfg.h0, cfg.a);
    const auto image = load_binary_image(cfg.input, cfg.threshold, cfg.invert, cfg.extent_x);

    SolveOptions so;
    so.subdivisions = cfg.subdivisions;
    if (cfg.pad >= 0.0) so.padding = cfg.pad;
    so.tol = cfg.tol;
    const auto state = solve_state(image, params, so);

    FeatureOptions fo;
    fo.skeleton_width = cfg.skeleton_width;
    fo.orientation_eps = cfg.orientation_eps;
    const auto maps = compute_all(state, fo);

    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out + ": " + ec.message());
    const fs::path dir(cfg.out);

    std::vector<std::string> artifacts;
    const std::vector<std::pair<std::string, const ScalarRaster*>> scalars{
        {"s1", &maps.s1},       {"s2", &maps.s2},       {"f_h", &maps.inv_thickness},
        {"h_f", &maps.thickness}, {"f_s", &maps.skeleton}};
    for (const auto& name : cfg.formats) {
        const auto format = parse_format(name);
        for (const auto& [stem, raster] : scalars) {
            const auto file = stem + extension(format);
            export_scalar_field(*raster, dir / file, format);
            artifacts.push_back(file);
        }
    }
    export_vector_field(maps.normal, dir / "n_f.csv");
    export_vector_field(maps.tangent, dir / "t_f.csv");
    artifacts.push_back("n_f.csv");
    artifacts.push_back("t_f.csv");

    std::size_t degenerate = 0;
    for (auto d : maps.thickness_degenerate) degenerate += d;
    const auto& g = state.grid();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json manifest;
    manifest["config"] = cfg.to_json();
    manifest["derived"] = {{"a_tilde", params.a_tilde()},
                           {"alpha", params.alpha()},
                           {"lambda", params.lambda()},
                           {"pad", so.padding.value_or(params.default_padding())},
                           {"skeleton_width", fo.resolved_skeleton_width(image.pixel_size())},
                           {"pixel_size", image.pixel_size()},
                           {"extent_y", image.extent_y()}};
    manifest["image"] = {{"width", image.width()},
                         {"height", image.height()},
                         {"black_pixels", image.count_black()}};
    manifest["mesh"] = {{"nx", g.nx()},
                        {"ny", g.ny()},
                        {"subdivisions", g.subdivisions()},
                        {"element_size", g.element_size()},
                        {"nodes", g.node_count()},
                        {"elements", g.element_count()},
                        {"free_dofs", g.free_count()}};
    manifest["solver"] = {{"iterations", state.report().iterations},
                          {"relative_residual", state.report().relative_residual}};
    manifest["thickness_degenerate_pixels"] = degenerate;
    manifest["artifacts"] = artifacts;
    manifest["wall_time_s"] = wall;

    const auto manifest_path = dir / "manifest.json";
    std::ofstream mout(manifest_path, std::ios::binary);
    if (!mout) throw IoError("cannot write " + manifest_path.string());
    mout << manifest.dump(2) << '\n';
    if (!mout) throw IoError("write failed: " + manifest_path.string());

    std::cout << "wrote " << artifacts.size() << " artifacts + manifest to " << cfg.out << " ("
              << g.free_count() << " unknowns, CG iterations " << state.report().iterations[0]
              << "/" << state.report().iterations[1] << ")\n";
    return exit_ok;
}

struct OracleArgs {
    oracle1d::Config cfg;
    int samples = 201;
    std::string out;
};

int cmd_oracle1d(const OracleArgs& args) {
    args.cfg.validate();
    if (args.samples < 2) throw InputError("--samples must be >= 2");
    const auto finite = oracle1d::solve_finite(args.cfg);
    const auto limit = oracle1d::solve_limit(args.cfg.p, args.cfg.h, args.cfg.h0, args.cfg.a);
    const double c3 = finite.shifted().m1;
    const double h_bar = 1.0 / (args.cfg.h0 * c3) - args.cfg.h0 * args.cfg.a;

    std::ostringstream os;
    os << "x,s_finite,s_limit,h_f\n";
    const auto& c = args.cfg;
    for (int k = 0; k < args.samples; ++k) {
        const double x = k + 1 == args.samples ? c.L : c.K + (c.L - c.K) * k / (args.samples - 1);
        const bool black = x >= c.p && x <= c.p + c.h;
        os << shapefeat::detail::format_number(x) << ','
           << shapefeat::detail::format_number(finite(x)) << ','
           << shapefeat::detail::format_number(limit(x)) << ','
           << shapefeat::detail::format_number(black ? h_bar : 0.0) << '\n';
    }
    if (args.out.empty() || args.out == "-") {
        std::cout << os.str();
    } else {
        std::ofstream out(args.out, std::ios::binary);
        if (!out) throw IoError("cannot write " + args.out);
        out << os.str();
        if (!out) throw IoError("write failed: " + args.out);
    }
    return exit_ok;
}

int cmd_validate(const std::vector<std::string>& only_raw, double tol) {
    std::vector<std::string> only;
    for (const auto& item : only_raw) {
        std::stringstream ss(item);
        std::string part;
        while (std::getline(ss, part, ','))
            if (!part.empty()) only.push_back(part);
    }
    for (const auto& name : only) {
        bool known = false;
        for (const auto& c : validate::all_criteria()) known |= c.id == name || c.name == name;
        if (!known) throw InputError("unknown criterion '" + name + "'");
    }
    validate::Options opts;
    opts.tol = tol;
    const auto results = validate::run(only, opts);
    validate::print(stdout, results);
    const bool ok = validate::all_passed(results);
    if (!ok) {
        std::fprintf(stdout, "failed:");
        for (const auto& r : results)
            if (!validate::all_passed({r})) std::fprintf(stdout, " %s", r.id.c_str());
        std::fprintf(stdout, "\n");
    }
    return ok ? exit_ok : exit_validation_failed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shape features (thickness, orientation, skeleton) of binary images"};
    app.require_subcommand(1);

    RunConfig run;
    std::string manifest_in;
    auto* analyze = app.add_subcommand("analyze", "Extract feature maps from a binary image");
    analyze->add_option("input", run.input, "PGM or PNG image");
    analyze->add_option("--extent-x", run.extent_x, "Physical width of the image");
    analyze->add_option("--h0", run.h0, "Characteristic length (about the smallest thickness)");
    analyze->add_option("--a", run.a, "Diffusion parameter")->capture_default_str();
    analyze->add_option("--subdivisions", run.subdivisions, "Elements per pixel edge (0: auto)")
        ->capture_default_str();
    analyze->add_option("--pad", run.pad, "White margin around the image (<0: auto)")
        ->capture_default_str();
    analyze->add_option("--tol", run.tol, "CG relative residual")->capture_default_str();
    analyze->add_option("--skeleton-width", run.skeleton_width,
                        "Skeleton pulse half-width, physical units (0: 0.75 pixel)")
        ->capture_default_str();
    analyze->add_option("--orientation-eps", run.orientation_eps,
                        "Relative |s| below which orientation is undefined")
        ->capture_default_str();
    analyze->add_option("--threshold", run.threshold, "Intensity threshold in (0,1)")
        ->capture_default_str();
    analyze->add_flag("--invert", run.invert, "Treat light pixels as the shape");
    analyze->add_option("--out", run.out, "Output directory")->capture_default_str();
    analyze->add_option("--format", run.formats, "Raster formats: pgm, png, csv")
        ->delimiter(',')
        ->capture_default_str();
    analyze->add_option("--manifest", manifest_in, "Re-run the configuration stored in a manifest");

    OracleArgs oracle;
    auto* o1d = app.add_subcommand("oracle1d", "Sample the analytic 1D solution as CSV");
    o1d->set_help_flag("--help", "Print this help message and exit"); // frees -h for --h
    o1d->add_option("--K", oracle.cfg.K, "Left end")->capture_default_str();
    o1d->add_option("--L", oracle.cfg.L, "Right end")->capture_default_str();
    o1d->add_option("--p", oracle.cfg.p, "Bar left edge")->capture_default_str();
    o1d->add_option("--h", oracle.cfg.h, "Bar width")->capture_default_str();
    o1d->add_option("--h0", oracle.cfg.h0, "Characteristic length")->capture_default_str();
    o1d->add_option("--a", oracle.cfg.a, "Diffusion parameter")->capture_default_str();
    o1d->add_option("--samples", oracle.samples, "Number of rows")->capture_default_str();
    o1d->add_option("--out", oracle.out, "Output CSV (default stdout)");

    std::vector<std::string> only;
    double validate_tol = 1e-10;
    auto* val = app.add_subcommand("validate", "Run the acceptance checks");
    val->add_option("--only", only, "Criteria to run (id or name, comma separated)")
        ->delimiter(',');
    val->add_option("--tol", validate_tol, "CG relative residual")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_input;
    }

    try {
        if (*analyze) return cmd_analyze(run, manifest_in);
        if (*o1d) return cmd_oracle1d(oracle);
        if (*val) return cmd_validate(only, validate_tol);
    } catch (const Error& e) {
        std::cerr << "shapefeat: " << to_string(e.category()) << ": " << e.what() << '\n';
        return exit_code_for(e.category());
    } catch (const std::exception& e) {
        std::cerr << "shapefeat: " << e.what() << '\n';
        return exit_numeric;
    }
    return exit_ok;
}
