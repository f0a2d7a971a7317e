#include "mosaic/measfile.hpp"

#include <cstdio>
#include <fstream>
#include <string>

#include "mosaic/errors.hpp"

namespace mosaic {

namespace {
constexpr const char* kMagic = "MOSAICMEAS";
constexpr int kVersion = 1;
}  // namespace

void save_measurements(const MeasurementFile& mf, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("save_measurements: cannot open " + path.string());
    char buf[160];
    out << kMagic << ' ' << kVersion << '\n';
    std::snprintf(buf, sizeof buf, "%d %d %d %.17g %llu\n", mf.width, mf.height, mf.side, mf.gamma,
                  static_cast<unsigned long long>(mf.seed));
    out << buf;
    out << mf.patch_values.size() << ' ' << mf.mask.m << '\n';
    auto ids = mf.mask.indices();
    for (std::size_t p = 0; p < mf.patch_values.size(); ++p) {
        if (static_cast<int>(mf.patch_values[p].size()) != mf.mask.m)
            throw std::invalid_argument("save_measurements: value count does not match mask");
        out << "patch " << p << '\n';
        for (int k = 0; k < mf.mask.m; ++k) {
            std::snprintf(buf, sizeof buf, "%d %d %.17g\n", ids[k].i, ids[k].j,
                          mf.patch_values[p][k]);
            out << buf;
        }
    }
    if (!out) throw io_error("save_measurements: write failed for " + path.string());
}

MeasurementFile load_measurements(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("load_measurements: cannot open " + path.string());
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic)
        throw io_error("load_measurements: not a measurement file: " + path.string());
    if (version != kVersion)
        throw io_error("load_measurements: unsupported version " + std::to_string(version));

    MeasurementFile mf;
    std::size_t patches = 0;
    int m = 0;
    if (!(in >> mf.width >> mf.height >> mf.side >> mf.gamma >> mf.seed >> patches >> m))
        throw io_error("load_measurements: malformed header in " + path.string());
    if (mf.width < 1 || mf.height < 1 || mf.side < 2 || m < 1 || patches < 1)
        throw io_error("load_measurements: inconsistent header in " + path.string());

    mf.mask.n = mf.side * mf.side;
    mf.mask.m = m;
    mf.mask.side = mf.side;
    mf.mask.gamma = mf.gamma;
    mf.mask.seed = mf.seed;
    mf.patch_values.assign(patches, std::vector<double>(m));
    std::vector<int> flat(m);
    for (std::size_t p = 0; p < patches; ++p) {
        std::string word;
        std::size_t idx = 0;
        if (!(in >> word >> idx) || word != "patch" || idx != p)
            throw io_error("load_measurements: malformed patch marker in " + path.string());
        for (int k = 0; k < m; ++k) {
            int i = 0, j = 0;
            double y = 0;
            if (!(in >> i >> j >> y))
                throw io_error("load_measurements: truncated measurements in " + path.string());
            int l = flatten(Index2{i, j}, mf.side);
            if (p == 0) {
                flat[k] = l;
                if (k > 0 && flat[k] <= flat[k - 1])
                    throw io_error("load_measurements: indices out of order in " + path.string());
            } else if (flat[k] != l) {
                throw io_error("load_measurements: patch index sets differ in " + path.string());
            }
            mf.patch_values[p][k] = y;
        }
    }
    mf.mask.flat = std::move(flat);
    return mf;
}

}  // namespace mosaic
