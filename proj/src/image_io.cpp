#include "leafdx/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <jpeglib.h>
#include <png.h>

namespace leafdx::io {

namespace {

// ---------------------------------------------------------------- PNG

struct PngReadState {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->offset + length > state->bytes.size()) png_error(png, "truncated png");
    std::memcpy(out, state->bytes.data() + state->offset, length);
    state->offset += length;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

// Errors surface as exceptions, so libpng stays quiet.
[[noreturn]] void png_error_quiet(png_structp png, png_const_charp) { png_longjmp(png, 1); }
void png_warning_quiet(png_structp, png_const_charp) {}

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 8;
    std::vector<std::uint8_t> data;  // big-endian samples when 16-bit
};

// `keep16` preserves 16-bit samples (label maps); otherwise reduced to 8.
DecodedPng decode_png_raw(std::span<const std::uint8_t> bytes, bool keep16) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_quiet, png_warning_quiet);
    if (!png) throw Error(ErrorCode::IoError, "png: cannot allocate reader");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error(ErrorCode::IoError, "png: cannot allocate info");
    }
    DecodedPng out;
    std::vector<png_bytep> rows;
    PngReadState state{bytes, 0};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::MalformedFile, "png: decode failed");
    }
    png_set_read_fn(png, &state, png_read_from_span);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16 && !keep16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.data.resize(stride * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.data.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

Bytes encode_png_raw(int width, int height, int color_type, int bit_depth,
                     std::span<const std::uint8_t> data, std::size_t stride) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_quiet, png_warning_quiet);
    if (!png) throw Error(ErrorCode::IoError, "png: cannot allocate writer");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error(ErrorCode::IoError, "png: cannot allocate info");
    }
    Bytes out;
    std::vector<png_bytep> rows(height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoError, "png: encode failed");
    }
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(data.data() + stride * y);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

bool is_png(std::span<const std::uint8_t> b) {
    return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> b) {
    return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

Raster to_raster(const DecodedPng& d) {
    if (d.channels == 1 || d.channels == 3)
        return Raster(d.width, d.height, d.channels, d.data);
    if (d.channels == 2 || d.channels == 4) {
        // Alpha not stripped by libpng (old files); drop it here.
        const int keep = d.channels == 2 ? 1 : 3;
        Raster out(d.width, d.height, keep);
        auto dst = out.data();
        for (std::size_t i = 0, n = static_cast<std::size_t>(d.width) * d.height; i < n; ++i)
            for (int c = 0; c < keep; ++c) dst[i * keep + c] = d.data[i * d.channels + c];
        return out;
    }
    throw Error(ErrorCode::MalformedFile, "png: unsupported channel layout");
}

// ---------------------------------------------------------------- JPEG

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegError*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

void jpeg_output_quiet(j_common_ptr) {}

Raster decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo{};
    JpegError err{};
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    err.mgr.output_message = jpeg_output_quiet;
    // Locals that must survive longjmp live outside the setjmp scope.
    auto* out = new Raster();
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        delete out;
        throw Error(ErrorCode::MalformedFile, "jpeg: decode failed");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    if (cinfo.num_components != 1) cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    *out = Raster(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height),
                  cinfo.output_components == 1 ? 1 : 3);
    const std::size_t stride = static_cast<std::size_t>(out->width()) * out->channels();
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out->data().data() + stride * cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    Raster result = std::move(*out);
    delete out;
    return result;
}

}  // namespace

Raster decode_image(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return to_raster(decode_png_raw(bytes, false));
    if (is_jpeg(bytes)) return decode_jpeg(bytes);
    throw Error(ErrorCode::MalformedFile, "unrecognised image format");
}

Raster read_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

Bytes encode_png(const Raster& img) {
    const int type = img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    return encode_png_raw(img.width(), img.height(), type, 8, img.data(),
                          static_cast<std::size_t>(img.width()) * img.channels());
}

void write_png(const std::filesystem::path& path, const Raster& img) {
    write_file(path, encode_png(img));
}

Bytes encode_jpeg(const Raster& img, int quality) {
    jpeg_compress_struct cinfo{};
    JpegError err{};
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    err.mgr.output_message = jpeg_output_quiet;
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::free(buffer);
        throw Error(ErrorCode::IoError, "jpeg: encode failed");
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &size);
    cinfo.image_width = static_cast<JDIMENSION>(img.width());
    cinfo.image_height = static_cast<JDIMENSION>(img.height());
    cinfo.input_components = img.channels();
    cinfo.in_color_space = img.channels() == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
    while (cinfo.next_scanline < cinfo.image_height) {
        auto* row = const_cast<JSAMPROW>(img.data().data() + stride * cinfo.next_scanline);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    Bytes out(buffer, buffer + size);
    std::free(buffer);
    return out;
}

void write_jpeg(const std::filesystem::path& path, const Raster& img, int quality) {
    write_file(path, encode_jpeg(img, quality));
}

Bytes encode_mask_png(const BinaryMask& m) {
    std::vector<std::uint8_t> grey(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) grey[i] = m[i] ? 255 : 0;
    return encode_png_raw(m.width(), m.height(), PNG_COLOR_TYPE_GRAY, 8, grey,
                          static_cast<std::size_t>(m.width()));
}

BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes) {
    if (!is_png(bytes)) throw Error(ErrorCode::MalformedFile, "mask is not a png");
    const Raster r = to_raster(decode_png_raw(bytes, false));
    BinaryMask out(r.width(), r.height());
    for (int y = 0; y < r.height(); ++y)
        for (int x = 0; x < r.width(); ++x) out(x, y) = r.at(x, y, 0) >= 128;
    return out;
}

Bytes encode_labels_png(const LabelMap& labels) {
    std::vector<std::uint8_t> data(labels.size() * 2);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] > 0xFFFF)
            throw Error(ErrorCode::InvalidArgument, "label id does not fit 16 bits");
        data[2 * i] = static_cast<std::uint8_t>(labels[i] >> 8);
        data[2 * i + 1] = static_cast<std::uint8_t>(labels[i] & 0xFF);
    }
    return encode_png_raw(labels.width(), labels.height(), PNG_COLOR_TYPE_GRAY, 16, data,
                          static_cast<std::size_t>(labels.width()) * 2);
}

LabelMap decode_labels_png(std::span<const std::uint8_t> bytes) {
    if (!is_png(bytes)) throw Error(ErrorCode::MalformedFile, "label map is not a png");
    const DecodedPng d = decode_png_raw(bytes, true);
    if (d.channels != 1) throw Error(ErrorCode::MalformedFile, "label map must be single-channel");
    LabelMap out(d.width, d.height);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = d.bit_depth == 16 ? (d.data[2 * i] << 8) | d.data[2 * i + 1] : d.data[i];
    return out;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace leafdx::io
