#include "sonoguide/service_http.hpp"

namespace sonoguide {

void mount_api(httplib::Server& server, const ApiService& service, bool cors) {
  auto forward = [&service, cors](const httplib::Request& req, httplib::Response& res) {
    if (cors) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    }
    if (req.method == "OPTIONS") {
      res.status = 204;
      return;
    }
    const ApiResponse r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(".*", forward);
  server.Post(".*", forward);
  server.Options(".*", forward);
}

}  // namespace sonoguide
