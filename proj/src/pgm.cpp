#include "recon/pgm.hpp"

#include <algorithm>
#include <cmath>

#include "recon/errors.hpp"
#include "recon/io_util.hpp"

namespace recon {

void write_pgm(const std::filesystem::path& path, const Tensor<float>& image, double lo,
               double hi) {
    if (image.shape().rank() != 2)
        throw ShapeMismatch("write_pgm: expected a rank-2 image, got " + image.shape().str());
    if (!(hi > lo)) throw BadParams("write_pgm: hi must exceed lo");
    const std::int64_t h = image.shape().extent(0), w = image.shape().extent(1);
    write_file_atomic(path, [&](std::ostream& os) {
        os << "P5\n" << w << ' ' << h << "\n255\n";
        const double scale = 255.0 / (hi - lo);
        for (float v : image.data()) {
            const double mapped = std::clamp((static_cast<double>(v) - lo) * scale, 0.0, 255.0);
            os.put(static_cast<char>(static_cast<unsigned char>(std::lround(mapped))));
        }
    });
}

Tensor<float> central_slice(const Tensor<float>& volume) {
    if (volume.shape().rank() != 3)
        throw ShapeMismatch("central_slice: expected rank 3, got " + volume.shape().str());
    const std::int64_t D = volume.shape().extent(0), H = volume.shape().extent(1),
                       W = volume.shape().extent(2);
    const std::int64_t d = D / 2;
    Tensor<float> out(Shape{H, W});
    std::copy(volume.raw() + d * H * W, volume.raw() + (d + 1) * H * W, out.raw());
    return out;
}

} // namespace recon
