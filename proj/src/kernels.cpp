#include "fadelab/kernels.hpp"

#include "fadelab/error.hpp"

#include <cstdlib>

namespace fadelab::kernels {

const Backend* avx2_backend_impl(); // defined in kernels_avx2.cpp

bool avx2_supported() {
#if defined(__GNUC__) || defined(__clang__)
    return avx2_backend_impl() != nullptr && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

const Backend* select_backend() {
    if (const char* forced = std::getenv("FADELAB_KERNELS")) {
        const std::string name(forced);
        if (name == "scalar") {
            return &scalar_backend();
        }
        if (name == "avx2") {
            require(avx2_supported(), ErrorKind::config, "FADELAB_KERNELS=avx2 but AVX2 is unavailable");
            return avx2_backend_impl();
        }
        throw_error(ErrorKind::config, "unknown FADELAB_KERNELS value '" + name + "'");
    }
    if (avx2_supported()) {
        return avx2_backend_impl();
    }
    return &scalar_backend();
}

const Backend*& active_slot() {
    static const Backend* slot = select_backend();
    return slot;
}

} // namespace

const Backend& active() { return *active_slot(); }

void force_backend(const std::string& name) {
    if (name == "scalar") {
        active_slot() = &scalar_backend();
        return;
    }
    if (name == "avx2") {
        require(avx2_supported(), ErrorKind::config, "AVX2 backend requested but unavailable on this CPU");
        active_slot() = avx2_backend_impl();
        return;
    }
    throw_error(ErrorKind::config, "unknown kernel backend '" + name + "'");
}

std::vector<const Backend*> available_backends() {
    std::vector<const Backend*> out{&scalar_backend()};
    if (avx2_supported()) {
        out.push_back(avx2_backend_impl());
    }
    return out;
}

} // namespace fadelab::kernels
