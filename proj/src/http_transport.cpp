// Eigen (via backends.hpp) must precede httplib: <resolv.h> defines a `_res`
// macro that collides with Eigen's product kernels.
#include "transprompt/backends.hpp"
#include "transprompt/errors.hpp"

#include <fmt/format.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace transprompt {

namespace {

class HttplibTransport final : public HttpTransport {
public:
  HttpResult post(const std::string& url,
                  const std::vector<std::pair<std::string, std::string>>& headers,
                  const std::string& body) override {
    // Split "scheme://host[:port]/path" into the client base and request path.
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw_contract(fmt::format("endpoint '{}' lacks a scheme", url));
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string base = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    auto res = client.Post(path, hdrs, body, "application/json");
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

}  // namespace transprompt
