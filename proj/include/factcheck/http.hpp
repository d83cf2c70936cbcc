#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <utility>

namespace factcheck {

struct HttpResponse {
    int status = 0;  // 0 = transport failure (connect error, timeout)
    std::string body;
    std::string transport_error;
};

using HttpHeaders = std::map<std::string, std::string>;

/// POSTs a JSON body to a path relative to a fixed origin.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post_json(const std::string& path, const std::string& body,
                                   const HttpHeaders& headers) = 0;
};

/// cpp-httplib backed transport. `base_url` is "scheme://host[:port][/prefix]"; the prefix is
/// prepended to every request path.
std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   std::chrono::milliseconds timeout);

/// Path prefix component of a base URL ("" when absent).
std::string url_path_prefix(const std::string& base_url);

/// Joins an OpenAI-style endpoint under a base URL, adding "/v1" unless the base already
/// ends with it. ("http://h", "/embeddings") -> "/v1/embeddings".
std::string openai_endpoint_path(const std::string& base_url, const std::string& endpoint);

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{30'000};
    std::uint64_t seed = 0;
};

/// Timeouts/transport failures, 408, 429 and 5xx.
bool is_retryable_status(int status) noexcept;

/// Process-wide admission control for outbound model calls: a cap on requests in flight
/// plus a token bucket refilled at `requests_per_minute` (0 disables the bucket).
class RateLimiter {
public:
    RateLimiter(std::size_t max_in_flight, double requests_per_minute);

    class Permit {
    public:
        explicit Permit(RateLimiter* owner) : owner_(owner) {}
        Permit(Permit&& o) noexcept : owner_(std::exchange(o.owner_, nullptr)) {}
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        Permit& operator=(Permit&&) = delete;
        ~Permit();

    private:
        RateLimiter* owner_;
    };

    Permit acquire();
    std::size_t in_flight() const;
    std::size_t max_in_flight() const { return max_in_flight_; }

private:
    void release();

    const std::size_t max_in_flight_;
    const double per_minute_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::size_t in_flight_ = 0;
    double tokens_;
    std::chrono::steady_clock::time_point last_refill_;
};

/// Sends with retry: exponential backoff (base * 2^attempt, capped) with full jitter.
/// Returns the first 2xx response. Throws ProviderError with the status and a body excerpt on a
/// non-retryable status, or with the attempt count once the budget is exhausted.
HttpResponse post_with_retry(HttpTransport& transport, const std::string& path,
                             const std::string& body, const HttpHeaders& headers,
                             const RetryPolicy& policy, RateLimiter* limiter = nullptr);

}  // namespace factcheck
