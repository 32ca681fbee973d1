#include "gdsr/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace gdsr {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// one whitespace-delimited token, skipping '#' comment lines
std::string next_pnm_token(std::FILE* f) {
    std::string tok;
    int c;
    while ((c = std::fgetc(f)) != EOF) {
        if (c == '#') {
            while ((c = std::fgetc(f)) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw std::runtime_error("corrupt header");
    return tok;
}

long parse_pnm_int(std::FILE* f) {
    const std::string tok = next_pnm_token(f);
    for (char ch : tok)
        if (!std::isdigit(static_cast<unsigned char>(ch)))
            throw std::runtime_error("corrupt header");
    return std::stol(tok);
}

ImageGrid read_pgm(std::FILE* f) {
    const long w = parse_pnm_int(f);
    const long h = parse_pnm_int(f);
    const long maxval = parse_pnm_int(f);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw std::runtime_error("corrupt header");
    const bool wide = maxval > 255;
    const size_t npix = static_cast<size_t>(w) * h;
    std::vector<unsigned char> buf(npix * (wide ? 2 : 1));
    if (std::fread(buf.data(), 1, buf.size(), f) != buf.size())
        throw std::runtime_error("io failure: truncated pixel data");
    ImageGrid img(static_cast<int>(h), static_cast<int>(w));
    const double inv = 1.0 / static_cast<double>(maxval);
    if (wide) {
        for (size_t i = 0; i < npix; ++i) {
            // PGM 16-bit samples are big-endian
            const unsigned v = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
            img[i] = v * inv;
        }
    } else {
        for (size_t i = 0; i < npix; ++i) img[i] = buf[i] * inv;
    }
    return img;
}

ImageGrid read_png(std::FILE* f) {
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("io failure: png init");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("io failure: png init");
    }
    std::vector<std::vector<png_byte>> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("corrupt header");
    }
    png_init_io(png, f);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported format: PNG must be grayscale");
    }
    if (depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        depth = 8;
    }
    png_read_update_info(png, info);

    rows.assign(h, std::vector<png_byte>(png_get_rowbytes(png, info)));
    std::vector<png_bytep> row_ptrs(h);
    for (png_uint_32 r = 0; r < h; ++r) row_ptrs[r] = rows[r].data();
    png_read_image(png, row_ptrs.data());
    png_destroy_read_struct(&png, &info, nullptr);

    ImageGrid img(static_cast<int>(h), static_cast<int>(w));
    const double inv = depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    for (png_uint_32 r = 0; r < h; ++r) {
        const png_byte* row = rows[r].data();
        for (png_uint_32 c = 0; c < w; ++c) {
            unsigned v;
            if (depth == 16)
                v = (static_cast<unsigned>(row[2 * c]) << 8) | row[2 * c + 1];
            else
                v = row[c];
            img.at(static_cast<int>(r), static_cast<int>(c)) = v * inv;
        }
    }
    return img;
}

}  // namespace

ImageGrid read_image(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("io failure: cannot open " + path);
    unsigned char magic[8] = {0};
    const size_t got = std::fread(magic, 1, sizeof(magic), f.get());
    if (std::fseek(f.get(), 0, SEEK_SET) != 0)
        throw std::runtime_error("io failure: seek");
    if (got >= 2 && magic[0] == 'P' && magic[1] == '5') {
        std::fseek(f.get(), 2, SEEK_SET);
        return read_pgm(f.get());
    }
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (got == 8 && std::equal(png_sig, png_sig + 8, magic)) return read_png(f.get());
    throw std::runtime_error("unsupported format: " + path);
}

void write_image(const ImageGrid& img, const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("io failure: cannot open " + path);
    if (std::fprintf(f.get(), "P5\n%d %d\n65535\n", img.width(), img.height()) < 0)
        throw std::runtime_error("io failure: write header");
    std::vector<unsigned char> buf(img.size() * 2);
    for (size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp(img[i], 0.0, 1.0);
        const unsigned q = static_cast<unsigned>(std::lround(v * 65535.0));
        buf[2 * i] = static_cast<unsigned char>(q >> 8);  // big-endian
        buf[2 * i + 1] = static_cast<unsigned char>(q & 0xFF);
    }
    if (std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size())
        throw std::runtime_error("io failure: write pixels");
}

}  // namespace gdsr
