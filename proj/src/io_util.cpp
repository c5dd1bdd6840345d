#include "recon/io_util.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <system_error>
#include <unistd.h>

#include "recon/errors.hpp"

namespace recon {

namespace {
std::filesystem::path temp_sibling(const std::filesystem::path& path) {
    static std::atomic<unsigned> counter{0};
    auto name = path.filename().string() + ".tmp" + std::to_string(::getpid()) + "." +
                std::to_string(counter.fetch_add(1));
    return path.parent_path() / name;
}
} // namespace

void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer) {
    std::error_code ec;
    if (!path.parent_path().empty()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoFailure("cannot create directory " + path.parent_path().string() +
                                ": " + ec.message());
    }
    const auto tmp = temp_sibling(path);
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoFailure("cannot open " + tmp.string() + " for writing");
        try {
            writer(os);
        } catch (...) {
            os.close();
            std::filesystem::remove(tmp, ec);
            throw;
        }
        os.flush();
        if (!os) {
            os.close();
            std::filesystem::remove(tmp, ec);
            throw IoFailure("write to " + tmp.string() + " failed");
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoFailure("rename " + tmp.string() + " -> " + path.string() + " failed");
    }
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace recon
