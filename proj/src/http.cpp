#include "factcheck/http.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>

#include "factcheck/error.hpp"

namespace factcheck {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // "" or "/..." without trailing slash
};

SplitUrl split_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto slash = base_url.find('/', host_start);
    SplitUrl out;
    if (slash == std::string::npos) {
        out.origin = base_url;
    } else {
        out.origin = base_url.substr(0, slash);
        out.prefix = base_url.substr(slash);
    }
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    return out;
}

class HttplibTransport final : public HttpTransport {
public:
    HttplibTransport(const std::string& base_url, std::chrono::milliseconds timeout)
        : url_(split_url(base_url)), timeout_(timeout) {}

    HttpResponse post_json(const std::string& path, const std::string& body,
                           const HttpHeaders& headers) override {
        // httplib::Client is not thread-safe; one per request keeps the transport shareable.
        httplib::Client client(url_.origin);
        auto secs = timeout_.count() / 1000;
        auto usecs = (timeout_.count() % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);

        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(url_.prefix + path, h, body, "application/json");
        HttpResponse out;
        if (!res) {
            out.status = 0;
            out.transport_error = httplib::to_string(res.error());
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    }

private:
    SplitUrl url_;
    std::chrono::milliseconds timeout_;
};

std::string excerpt(const std::string& s, std::size_t n = 300) {
    return s.size() <= n ? s : s.substr(0, n) + "...";
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   std::chrono::milliseconds timeout) {
    return std::make_unique<HttplibTransport>(base_url, timeout);
}

std::string url_path_prefix(const std::string& base_url) { return split_url(base_url).prefix; }

std::string openai_endpoint_path(const std::string& base_url, const std::string& endpoint) {
    auto prefix = url_path_prefix(base_url);
    bool has_v1 = prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0;
    return (has_v1 ? std::string{} : std::string{"/v1"}) + endpoint;
}

bool is_retryable_status(int status) noexcept {
    return status == 0 || status == 408 || status == 429 || (status >= 500 && status <= 599);
}

// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(std::size_t max_in_flight, double requests_per_minute)
    : max_in_flight_(std::max<std::size_t>(1, max_in_flight)),
      per_minute_(requests_per_minute),
      tokens_(requests_per_minute > 0 ? std::max(1.0, requests_per_minute / 60.0) : 0.0),
      last_refill_(std::chrono::steady_clock::now()) {}

RateLimiter::Permit::~Permit() {
    if (owner_) owner_->release();
}

RateLimiter::Permit RateLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    if (per_minute_ > 0) {
        const double burst = std::max(1.0, per_minute_ / 60.0);
        for (;;) {
            auto now = std::chrono::steady_clock::now();
            std::chrono::duration<double> dt = now - last_refill_;
            tokens_ = std::min(burst, tokens_ + dt.count() * per_minute_ / 60.0);
            last_refill_ = now;
            if (tokens_ >= 1.0) break;
            auto wait = std::chrono::duration<double>((1.0 - tokens_) * 60.0 / per_minute_);
            cv_.wait_for(lock, wait);
        }
        tokens_ -= 1.0;
    }
    ++in_flight_;
    return Permit(this);
}

void RateLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_all();
}

std::size_t RateLimiter::in_flight() const {
    std::lock_guard lock(mu_);
    return in_flight_;
}

// ---------------------------------------------------------------------------

HttpResponse post_with_retry(HttpTransport& transport, const std::string& path,
                             const std::string& body, const HttpHeaders& headers,
                             const RetryPolicy& policy, RateLimiter* limiter) {
    std::mt19937_64 rng(policy.seed);
    const int attempts = std::max(1, policy.max_attempts);
    HttpResponse last;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (limiter) {
            auto permit = limiter->acquire();
            last = transport.post_json(path, body, headers);
        } else {
            last = transport.post_json(path, body, headers);
        }
        if (last.status >= 200 && last.status < 300) return last;
        if (!is_retryable_status(last.status)) {
            throw ProviderError("HTTP " + std::to_string(last.status) + " from " + path + ": " +
                                    excerpt(last.body),
                                last.status, false, attempt);
        }
        if (attempt == attempts) break;
        auto cap = std::min<std::int64_t>(policy.max_delay.count(),
                                          policy.base_delay.count() << std::min(attempt - 1, 20));
        std::uniform_int_distribution<std::int64_t> jitter(0, std::max<std::int64_t>(0, cap));
        std::this_thread::sleep_for(std::chrono::milliseconds(jitter(rng)));
    }
    std::string detail = last.status == 0 ? "transport error: " + last.transport_error
                                          : "HTTP " + std::to_string(last.status) + ": " +
                                                excerpt(last.body);
    throw ProviderError("retry budget exhausted after " + std::to_string(attempts) +
                            " attempts (" + detail + ")",
                        last.status, true, attempts);
}

}  // namespace factcheck
