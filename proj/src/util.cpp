#include "drowsy/util.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <mutex>

namespace drowsy {

int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

namespace {

// Persistent worker pool; spawning threads per matmul call costs more than
// the small products here. The caller runs chunk 0 itself.
class WorkerPool {
public:
    static WorkerPool& instance() {
        static WorkerPool pool(static_cast<std::size_t>(hardware_threads()) - 1);
        return pool;
    }

    std::size_t lanes() const { return workers_.size() + 1; }

    void run(std::size_t begin, std::size_t end, const std::function<void(std::size_t, std::size_t)>& body) {
        const std::size_t total = end - begin;
        const std::size_t nlanes = std::min(lanes(), total);
        if (nlanes <= 1) {
            body(begin, end);
            return;
        }
        const std::size_t chunk = (total + nlanes - 1) / nlanes;
        {
            std::lock_guard<std::mutex> lock(m_);
            body_ = &body;
            begin_ = begin;
            end_ = end;
            chunk_ = chunk;
            lanes_used_ = nlanes;
            pending_ = static_cast<int>(nlanes - 1);
            ++generation_;
        }
        cv_work_.notify_all();

        body(begin, std::min(end, begin + chunk));  // lane 0

        std::unique_lock<std::mutex> lock(m_);
        cv_done_.wait(lock, [this] { return pending_ == 0; });
        body_ = nullptr;
    }

private:
    explicit WorkerPool(std::size_t workers) {
        for (std::size_t i = 0; i < workers; ++i) {
            workers_.emplace_back([this, lane = i + 1] { worker_loop(lane); });
        }
    }

    ~WorkerPool() {
        {
            std::lock_guard<std::mutex> lock(m_);
            stop_ = true;
            ++generation_;
        }
        cv_work_.notify_all();
        for (auto& w : workers_) w.join();
    }

    void worker_loop(std::size_t lane) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(std::size_t, std::size_t)>* body = nullptr;
            std::size_t lo = 0, hi = 0;
            {
                std::unique_lock<std::mutex> lock(m_);
                cv_work_.wait(lock, [&] { return stop_ || generation_ != seen; });
                seen = generation_;
                if (stop_) return;
                if (lane >= lanes_used_) continue;  // not needed for this job
                body = body_;
                lo = begin_ + lane * chunk_;
                hi = std::min(end_, lo + chunk_);
            }
            if (body != nullptr && lo < hi) (*body)(lo, hi);
            {
                std::lock_guard<std::mutex> lock(m_);
                if (--pending_ == 0) cv_done_.notify_one();
            }
        }
    }

    std::vector<std::thread> workers_;
    std::mutex m_;
    std::condition_variable cv_work_, cv_done_;
    const std::function<void(std::size_t, std::size_t)>* body_ = nullptr;
    std::size_t begin_ = 0, end_ = 0, chunk_ = 0, lanes_used_ = 0;
    int pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

thread_local bool inside_parallel_region = false;

} // namespace

void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t, std::size_t)>& body) {
    if (end <= begin) return;
    // nested calls (e.g. a threaded matmul inside a per-sample loop) run
    // inline on whichever thread they happen to be on
    if (inside_parallel_region || hardware_threads() <= 1) {
        body(begin, end);
        return;
    }
    const std::function<void(std::size_t, std::size_t)> wrapped = [&body](std::size_t lo, std::size_t hi) {
        inside_parallel_region = true;
        struct Reset {
            ~Reset() { inside_parallel_region = false; }
        } reset;
        body(lo, hi);
    };
    WorkerPool::instance().run(begin, end, wrapped);
}

} // namespace drowsy
