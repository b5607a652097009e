#include "fft.hpp"

#include "nompcfar/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

namespace nompcfar::detail {

namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per extent list and kept for the process.
class PlanCache {
public:
    ~PlanCache() {
        for (auto& [dims, plan] : plans_)
            fftw_destroy_plan(plan);
    }

    fftw_plan get(const Dims& dims) {
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(dims); it != plans_.end())
            return it->second;

        // FFTW is row-major with the last extent fastest; ours is the reverse.
        std::vector<int> n(dims.rbegin(), dims.rend());
        const std::size_t total = element_count(dims);
        auto* scratch = fftw_alloc_complex(total);
        fftw_plan plan = fftw_plan_dft(static_cast<int>(n.size()), n.data(), scratch, scratch,
                                       FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(scratch);
        if (plan == nullptr)
            throw NumericalFailure("fftw: plan creation failed");
        plans_.emplace(dims, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<Dims, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

} // namespace

void fft_forward_padded(std::span<const Complex> in, const Dims& in_dims, const Dims& out_dims,
                        std::span<Complex> out) {
    if (in_dims.size() != out_dims.size())
        throw InvalidArgument("fft: rank mismatch");
    const std::size_t out_total = element_count(out_dims);
    if (out.size() != out_total || in.size() != element_count(in_dims))
        throw InvalidArgument("fft: buffer size mismatch");

    if (in_dims == out_dims) {
        if (in.data() != out.data())
            std::copy(in.begin(), in.end(), out.begin());
    } else {
        std::fill(out.begin(), out.end(), Complex{});
        // Copy input row by row along the fastest dimension.
        const std::size_t rank = in_dims.size();
        const std::size_t row = in_dims[0];
        const std::size_t rows = in.size() / row;
        std::vector<std::size_t> counter(rank, 0);
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t dst = 0;
            std::size_t stride = out_dims[0];
            for (std::size_t d = 1; d < rank; ++d) {
                dst += counter[d] * stride;
                stride *= out_dims[d];
            }
            std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(r * row), row,
                        out.begin() + static_cast<std::ptrdiff_t>(dst));
            for (std::size_t d = 1; d < rank; ++d) {
                if (++counter[d] < in_dims[d])
                    break;
                counter[d] = 0;
            }
        }
    }

    fftw_plan plan = cache().get(out_dims);
    auto* buf = reinterpret_cast<fftw_complex*>(out.data());
    fftw_execute_dft(plan, buf, buf);
}

} // namespace nompcfar::detail
