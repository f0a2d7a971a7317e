// Black-box checks of the command-line tool: file workflows, exit codes,
// config file handling. The binary path arrives as argv[1].

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "mosaic/imaging.hpp"
#include "mosaic/measfile.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace mosaic;
using testutil::check;

static std::string g_bin;
static fs::path g_dir;

static int run(const std::string& args) {
    std::string cmd = g_bin + " " + args + " >" + (g_dir / "out.log").string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: test_cli <mosaic-binary>\n";
        return 2;
    }
    g_bin = argv[1];
    g_dir = fs::temp_directory_path() / "mosaic_cli_test";
    fs::remove_all(g_dir);
    fs::create_directories(g_dir);
    const std::string dir = g_dir.string();

    // A 64x64 test image.
    {
        std::vector<double> v(64 * 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                v[y * 64 + x] = 0.2 + 0.6 * ((x / 8 + y / 8) % 2) * (0.3 + 0.7 * x / 63.0);
        write_pgm(GrayImage(64, 64, v), g_dir / "img.pgm");
    }

    // sample: writes mask + measurements; replay is byte-identical.
    check(run("sample --input " + dir + "/img.pgm --gamma 0.5 --seed 7 --out-prefix " + dir +
              "/s") == 0,
          "sample succeeds");
    check(fs::exists(g_dir / "s.mask") && fs::exists(g_dir / "s.meas"), "sample writes both files");
    check(run("sample --input " + dir + "/img.pgm --gamma 0.5 --seed 7 --out-prefix " + dir +
              "/s2") == 0,
          "sample replay succeeds");
    check(slurp(g_dir / "s.meas") == slurp(g_dir / "s2.meas"), "measurement replay byte-identical");
    check(slurp(g_dir / "s.mask") == slurp(g_dir / "s2.mask"), "mask replay byte-identical");

    // gamma=1 sample + inverse reconstruct is exact at 8-bit resolution.
    check(run("sample --input " + dir + "/img.pgm --gamma 1.0 --seed 1 --out-prefix " + dir +
              "/full") == 0,
          "gamma=1 sample succeeds");
    check(run("reconstruct --measurements " + dir + "/full.meas --method inverse --out " + dir +
              "/inv.pgm --truth " + dir + "/img.pgm --metrics " + dir + "/inv.csv") == 0,
          "inverse reconstruct succeeds");
    check(slurp(g_dir / "inv.pgm") == slurp(g_dir / "img.pgm"),
          "gamma=1 inverse round trip is bit-exact");
    {
        std::ifstream mcsv(g_dir / "inv.csv");
        std::string header, row;
        std::getline(mcsv, header);
        std::getline(mcsv, row);
        check(header == "psnr,ssim", "metrics csv header");
        double p = std::atof(row.c_str());
        check(std::isinf(p) || p > 100.0, "exact recovery reports an extreme psnr (" + row + ")");
    }

    // ista route runs end to end.
    check(run("reconstruct --measurements " + dir + "/full.meas --method ista --iters 3 --out " +
              dir + "/ista.pgm") == 0,
          "ista reconstruct succeeds");

    // Validation and IO error exit codes.
    check(run("reconstruct --measurements " + dir + "/full.meas --method mosaic --out " + dir +
              "/x.pgm") == 2,
          "mosaic without checkpoint exits 2");
    check(run("sample --input " + dir + "/img.pgm --gamma 1.7 --seed 1 --out-prefix " + dir +
              "/bad") == 2,
          "gamma out of range exits 2");
    check(run("sample --input " + dir + "/nope.pgm --gamma 0.5 --seed 1 --out-prefix " + dir +
              "/bad") == 3,
          "missing input exits 3");
    check(run("reconstruct --measurements " + dir + "/nope.meas --method inverse --out " + dir +
              "/x.pgm") == 3,
          "missing measurements exits 3");
    check(run("nonsense") == 2, "unknown subcommand exits 2");

    // Tiny train -> eval -> mosaic reconstruct -> noise sweep.
    check(run("train --synthetic 8 --gamma 0.25 --steps 8 --batch 2 --seed 3 --out " + dir +
              "/toy.ckpt --trace " + dir + "/trace.csv") == 0,
          "tiny train succeeds");
    check(fs::exists(g_dir / "toy.ckpt"), "checkpoint written");
    {
        std::ifstream tr(g_dir / "trace.csv");
        std::string header;
        std::getline(tr, header);
        check(header == "step,lr,loss", "trace csv header");
    }
    check(run("eval --checkpoint " + dir + "/toy.ckpt --synthetic 16 --gamma 0.25 --seeds 2 "
              "--out " + dir + "/eval.csv") == 0,
          "eval succeeds");
    {
        std::ifstream ev(g_dir / "eval.csv");
        std::string header;
        std::getline(ev, header);
        check(header == "seed,gamma,psnr,ssim", "metrics csv columns");
    }

    // Model trained at side 8 rejects side-32 measurements.
    check(run("reconstruct --measurements " + dir + "/full.meas --method mosaic --checkpoint " +
              dir + "/toy.ckpt --out " + dir + "/x.pgm") == 2,
          "side mismatch exits 2");

    // Mosaic route on matching side-8 measurements.
    {
        std::vector<double> v(8 * 8);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.2 + 0.01 * i;
        write_pgm(GrayImage(8, 8, v), g_dir / "tiny.pgm");
    }
    check(run("sample --input " + dir + "/tiny.pgm --gamma 0.25 --seed 2 --side 8 --out-prefix " +
              dir + "/t") == 0,
          "side-8 sampling succeeds");
    check(run("reconstruct --measurements " + dir + "/t.meas --method mosaic --checkpoint " +
              dir + "/toy.ckpt --out " + dir + "/trec.pgm") == 0,
          "mosaic reconstruct succeeds on matching side");
    check(fs::exists(g_dir / "trec.pgm"), "mosaic reconstruction written");

    check(run("noise-sweep --checkpoint " + dir + "/toy.ckpt --synthetic 16 --sigmas 0.0,0.1 "
              "--gammas 0.25 --seeds 1 --out " + dir + "/sweep.csv") == 0,
          "noise sweep succeeds");
    {
        std::ifstream sw(g_dir / "sweep.csv");
        std::string header, r1, r2;
        std::getline(sw, header);
        std::getline(sw, r1);
        std::getline(sw, r2);
        check(header == "sigma,gamma,psnr_mean,psnr_std,ssim_mean,ssim_std", "sweep csv columns");
        check(r1.rfind("0,", 0) == 0 && r2.rfind("0.1,", 0) == 0, "sweep rows ordered by sigma");
    }

    // Config file: [subcommand] sections with long option names as keys;
    // unknown keys rejected.
    {
        std::ofstream cfg(g_dir / "ok.cfg");
        cfg << "[sample]\ngamma=0.5\nseed=7\n";
        std::ofstream bad(g_dir / "bad.cfg");
        bad << "[sample]\ngamma=0.5\nnot_a_flag=1\n";
    }
    check(run("--config " + dir + "/ok.cfg sample --input " + dir + "/img.pgm --out-prefix " +
              dir + "/c") == 0,
          "config file supplies required flags");
    check(slurp(g_dir / "c.meas") == slurp(g_dir / "s.meas"),
          "config-file run matches flag run byte for byte");
    check(run("--config " + dir + "/bad.cfg sample --input " + dir + "/img.pgm --out-prefix " +
              dir + "/c2") == 2,
          "unknown config key exits 2");

    // bench and grad-check commands run.
    check(run("bench-wht --log2-size 16 --reps 2") == 0, "bench-wht runs");
    check(run("grad-check --coords 2 --seed 5") == 0, "grad-check passes");

    fs::remove_all(g_dir);
    return testutil::finish("test_cli");
}
