#include "freqpriv/image.hpp"

#include <fstream>

namespace freqpriv {

std::string encode_pgm(const Raster& img) {
    std::string out = "P5\n" + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
    return out;
}

std::string encode_ppm(const Raster& img) {
    std::string out = "P6\n" + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n255\n";
    out.reserve(out.size() + img.pixels.size() * 3);
    for (std::uint8_t p : img.pixels) {
        out.push_back(static_cast<char>(p));
        out.push_back(static_cast<char>(p));
        out.push_back(static_cast<char>(p));
    }
    return out;
}

namespace {

void write_file(const std::string& bytes, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace

void write_pgm(const Raster& img, const std::string& path) {
    write_file(encode_pgm(img), path);
}

void write_ppm(const Raster& img, const std::string& path) {
    write_file(encode_ppm(img), path);
}

Raster read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    auto next_token = [&in, &path]() {
        std::string tok;
        char c;
        while (in.get(c)) {
            if (c == '#') {  // comment to end of line
                while (in.get(c) && c != '\n') {}
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(c);
        }
        if (tok.empty()) throw IoError("pgm: unexpected end of header in " + path);
        return tok;
    };

    if (next_token() != "P5") throw IoError("pgm: " + path + " is not binary P5");
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w < 1 || h < 1 || maxval != 255) {
        throw IoError("pgm: unsupported header in " + path);
    }
    Raster img(w, h);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw IoError("pgm: truncated pixel data in " + path);
    }
    return img;
}

FeatureMap to_feature_map(const Raster& img) {
    FeatureMap out(1, img.height, img.width);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
        out.values[i] = (img.pixels[i] - 127.5) / 255.0;
    }
    return out;
}

}  // namespace freqpriv
