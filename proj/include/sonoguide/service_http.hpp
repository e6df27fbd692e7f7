#pragma once

#include "sonoguide/service.hpp"

#include <httplib.h>

namespace sonoguide {

/// Forwards every GET/POST/OPTIONS request on `server` to `service`. With
/// `cors`, responses allow any origin.
void mount_api(httplib::Server& server, const ApiService& service, bool cors);

}  // namespace sonoguide
