#include "helpers.hpp"

#include "infantprints/cli.hpp"
#include "infantprints/config.hpp"
#include "infantprints/image.hpp"
#include "infantprints/synth.hpp"
#include "infantprints/template_codec.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace infantprints;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "infantprints");
    std::ostringstream out, err;
    Run r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

// Renders one impression of a master to a PGM file.
std::string write_render(const std::filesystem::path& dir, const std::string& name, std::uint64_t seed,
                         double growth = 1.0)
{
    const auto master = synth::generate_master(seed, synth::PatternClass::loop);
    synth::ImpressionParams p;
    p.growth_lambda = growth;
    const auto path = dir / (name + ".pgm");
    write_pgm(synth::render_impression(master, p).image, path);
    return path.string();
}

}  // namespace

TEST_SUITE("config")
{
    TEST_CASE("dump and parse round trip")
    {
        Config c;
        c.set("fusion.minutiae", "0.7");
        c.set("fusion.texture", "0.3");
        c.set("fusion.external", "0");
        c.set("minmap.sigma_s", "5.123456789012345");
        c.set("eval.age_buckets", "a:0-4;b:4-");
        c.set("external.command", "my-matcher {probe} {enrolled}");
        const Config back = parse_config(c.dump());
        CHECK(back.dump() == c.dump());
        CHECK(back.minmap.sigma_s == 5.123456789012345);
        CHECK(back.weights == FusionWeights{0.7, 0.3, 0.0});
        for (const auto& k : Config::keys())
            CHECK(back.get(k) == c.get(k));
        CHECK_NOTHROW(back.validate());
    }

    TEST_CASE("bad input is rejected")
    {
        Config c;
        CHECK_THROWS_AS(c.set("minmap.sigma", "6"), ConfigError);
        CHECK_THROWS_AS(c.set("minmap.sigma_s", "six"), ConfigError);
        CHECK_THROWS_AS(c.set("texture.enabled", "maybe"), ConfigError);
        CHECK_THROWS_AS(parse_config("no equals sign"), ConfigError);
        CHECK_THROWS_AS(parse_config("bogus.key = 1"), ConfigError);
        c.set("fusion.minutiae", "0.9");
        CHECK_THROWS_AS(c.validate(), ConfigError);
        try {
            parse_config("# comment\n\nminmap.sigma_s = 6\nwhat = 1\n");
            FAIL("expected a ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("line 4") != std::string::npos);
        }
    }

    TEST_CASE("resolution scaling of extraction settings")
    {
        Config c;
        CHECK(c.extract_params(500).block_size == 16);
        CHECK(c.extract_params(1000).block_size == 32);
        CHECK(c.extract_params(1000).border_margin == 32);
        CHECK_FALSE(c.match_config().external.has_value());
        c.set("external.command", "x");
        CHECK(c.match_config().external.has_value());
    }
}

TEST_SUITE("cli")
{
    TEST_CASE("usage errors and config precedence")
    {
        CHECK(run({}).code == cli::kExitUsage);
        CHECK(run({"frobnicate"}).code == cli::kExitUsage);
        CHECK(run({"--set", "nope=1", "--dump-config"}).code == cli::kExitUsage);
        CHECK(run({"--set", "fusion.minutiae=0.9", "--dump-config"}).code == cli::kExitUsage);

        testing_support::TempDir dir("cli_cfg");
        {
            std::ofstream f(dir.path() / "c.cfg");
            f << "minmap.sigma_s = 7\naging.lambda = 1.2\n";
        }
        const auto r = run({"--config", (dir.path() / "c.cfg").string(), "--set", "aging.lambda=1.3", "--dump-config"});
        REQUIRE(r.code == cli::kExitOk);
        CHECK(r.out.find("minmap.sigma_s = 7\n") != std::string::npos);
        CHECK(r.out.find("aging.lambda = 1.3\n") != std::string::npos);
        CHECK(r.out.find("minmap.nms_radius = 12\n") != std::string::npos);

        // The dump loads back to the same settings.
        {
            std::ofstream f(dir.path() / "d.cfg");
            f << r.out;
        }
        CHECK(run({"--config", (dir.path() / "d.cfg").string(), "--dump-config"}).out == r.out);
    }

    TEST_CASE("enroll, match and search")
    {
        testing_support::TempDir dir("cli_flow");
        const auto d = dir.path();
        const std::string img_a = write_render(d, "a", 101);
        const std::string img_a2 = write_render(d, "a2", 101, 1.1);
        const std::string img_b = write_render(d, "b", 202);

        // Young enrollment: aged, coordinates grown by 1.1.
        auto r = run({"enroll", img_a, "--subject", "A", "--thumb", "left", "--age-weeks", "8", "--gender", "female",
                      "--out-dir", (d / "young").string()});
        REQUIRE(r.code == cli::kExitOk);
        CHECK(r.out.find("aged=yes") != std::string::npos);
        r = run({"enroll", img_a, "--subject", "A", "--thumb", "left", "--age-weeks", "8", "--probe", "--out-dir",
                 (d / "raw").string()});
        REQUIRE(r.code == cli::kExitOk);
        const Template young = load_template(d / "young" / "a.iptf");
        const Template raw = load_template(d / "raw" / "a.iptf");
        CHECK(young.aged);
        CHECK_FALSE(raw.aged);
        REQUIRE(young.minutiae.size() == raw.minutiae.size());
        REQUIRE(raw.minutiae.size() > 5);
        for (std::size_t i = 0; i < raw.minutiae.size(); ++i)
            CHECK(std::abs(young.minutiae.minutiae[i].x - 1.1 * raw.minutiae.minutiae[i].x) <= 2.0 / 256);

        r = run({"enroll", img_a, "--subject", "A", "--thumb", "left", "--age-weeks", "26", "--gender", "female",
                 "--out-dir", (d / "old").string(), "--list", "--dump-map", (d / "maps").string()});
        REQUIRE(r.code == cli::kExitOk);
        CHECK(r.out.find("aged=no") != std::string::npos);
        CHECK(std::filesystem::exists(d / "old" / "a.txt"));
        CHECK(std::filesystem::exists(d / "maps" / "a_ch00.txt"));

        r = run({"enroll", img_b, "--subject", "B", "--thumb", "left", "--age-weeks", "26", "--gender", "male",
                 "--out-dir", (d / "old").string()});
        REQUIRE(r.code == cli::kExitOk);

        // Blank capture: warning, template still written, data exit code.
        write_pgm(GrayImage(200, 200, 1000, 1.0f), d / "blank.pgm");
        r = run({"enroll", (d / "blank.pgm").string(), "--thumb", "left", "--age-weeks", "4"});
        CHECK(r.code == cli::kExitData);
        CHECK(r.err.find("warning") != std::string::npos);
        CHECK(load_template(d / "blank.iptf").minutiae.empty());

        CHECK(run({"enroll", img_a, "--thumb", "middle", "--age-weeks", "4"}).code == cli::kExitData);
        CHECK(run({"enroll", img_a, "--thumb", "left"}).code == cli::kExitUsage);

        const std::string a_old = (d / "old" / "a.iptf").string();
        const std::string b_old = (d / "old" / "b.iptf").string();
        r = run({"match", "--probe", a_old, "--enrolled", a_old});
        CHECK(r.code == cli::kExitOk);
        CHECK(first_line(r.out) == "1.0000");
        r = run({"match", "--probe", a_old, "--enrolled", b_old});
        CHECK(r.code == cli::kExitOk);
        CHECK(first_line(r.out) == "0.0000");

        // Grown probe against the young (aged) enrollment.
        r = run({"enroll", img_a2, "--subject", "A", "--thumb", "left", "--age-weeks", "20", "--probe", "--out-dir",
                 (d / "probe").string()});
        REQUIRE(r.code == cli::kExitOk);
        const std::string probe = (d / "probe" / "a2.iptf").string();
        r = run({"match", "--probe", probe, "--enrolled", (d / "young" / "a.iptf").string()});
        CHECK(r.code == cli::kExitOk);
        CHECK(std::stod(first_line(r.out)) > 0.6);

        // A failing external matcher is reported with its own exit code.
        r = run({"--set", "external.command=exit 1", "match", "--probe", a_old, "--enrolled", a_old, "--probe-images",
                 img_a, "--enrolled-images", img_a});
        CHECK(r.code == cli::kExitExternal);

        {
            std::ofstream m(d / "gallery.csv");
            m << "subject_id,session_id,capture_date,age_weeks,gender,thumb,path\n"
              << "A,s1,2019-03-01,8,unknown,left,young/a.iptf\n"
              << "B,s1,2019-03-01,26,unknown,left,old/b.iptf\n";
        }
        r = run({"search", "--probe", probe, "--gallery", (d / "gallery.csv").string()});
        CHECK(r.code == cli::kExitOk);
        const auto body = r.out.substr(r.out.find('\n') + 1);
        CHECK(first_line(body).rfind("1,A,", 0) == 0);

        {
            std::ofstream m(d / "broken.csv");
            m << "subject_id,session_id,capture_date,age_weeks,gender,thumb,path\n"
              << "A,s1,2019-03-01,eight,unknown,left,young/a.iptf\n";
        }
        r = run({"search", "--probe", probe, "--gallery", (d / "broken.csv").string()});
        CHECK(r.code == cli::kExitData);
        CHECK(r.err.find("line 2") != std::string::npos);
    }

    TEST_CASE("synth and eval are reproducible")
    {
        testing_support::TempDir dir("cli_synth");
        const auto a = dir.path() / "a", b = dir.path() / "b";
        REQUIRE(run({"synth", "--out", a.string(), "--seed", "3", "--subjects", "4"}).code == cli::kExitOk);
        REQUIRE(run({"-j", "2", "synth", "--out", b.string(), "--seed", "3", "--subjects", "4"}).code == cli::kExitOk);
        CHECK(run({"synth", "--out", a.string(), "--subjects", "4"}).code == cli::kExitUsage);

        const auto e1 = run({"eval", "--manifest", (a / "manifest.csv").string(), "--csv", (a / "r.csv").string()});
        const auto e2 = run({"eval", "--manifest", (b / "manifest.csv").string(), "--csv", (b / "r.csv").string()});
        REQUIRE(e1.code == cli::kExitOk);
        REQUIRE(e2.code == cli::kExitOk);
        CHECK(e1.out == e2.out);
        std::ifstream f1(a / "r.csv"), f2(b / "r.csv");
        std::stringstream s1, s2;
        s1 << f1.rdbuf();
        s2 << f2.rdbuf();
        CHECK(s1.str() == s2.str());
        CHECK(s1.str().rfind("age_bucket,", 0) == 0);

        const auto c = run({"calibrate", "--manifest", (a / "manifest.csv").string(), "--step", "0.25",
                            "--write-config", (dir.path() / "cal.cfg").string()});
        REQUIRE(c.code == cli::kExitOk);
        CHECK(c.out.find("fusion.minutiae = ") != std::string::npos);
        CHECK_NOTHROW(load_config(dir.path() / "cal.cfg").validate());
    }
}
