#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "radm/errors.hpp"

namespace radm {

/// Write via temp file + rename so the target is either complete or absent.
inline void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw data_error("cannot open for writing: " + tmp);
        out << content;
        if (!out) throw data_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw data_error("rename failed for: " + path);
    }
}

}  // namespace radm
