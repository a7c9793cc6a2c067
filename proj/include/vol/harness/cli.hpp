#pragma once

namespace vol {

// Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
int cli_main(int argc, char** argv);

}  // namespace vol
