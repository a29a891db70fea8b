#include <math.h>
#include <stdio.h>
#include "flowcl.h"

int main(void) {
    uint64_t count = 0;
    if (flowcl_preset_parameter_count("smaller-pack", &count) != FLOWCL_STATUS_OK || count != 482528) {
        fprintf(stderr, "parameter count %llu\n", (unsigned long long)count);
        return 1;
    }
    double z[4] = {1.0, 0.0, 0.0, 1.0};
    double loss = -1.0;
    if (flowcl_batch_loss(z, 2, 2, 0.5, &loss) != FLOWCL_STATUS_OK || loss != 0.0) {
        fprintf(stderr, "loss %g\n", loss);
        return 1;
    }
    size_t preds[3] = {0, 1, 1}, labels[3] = {0, 1, 0};
    FlowclMetrics m;
    if (flowcl_metrics(preds, labels, 3, 2, &m) != FLOWCL_STATUS_OK || fabs(m.accuracy - 2.0 / 3.0) > 1e-12) {
        return 1;
    }
    FlowclEncoder *enc = NULL;
    if (flowcl_encoder_load("/nonexistent/encoder.ckpt", &enc) != FLOWCL_STATUS_IO || enc != NULL) {
        return 1;
    }
    if (flowcl_last_error() == NULL) {
        return 1;
    }
    flowcl_encoder_free(NULL);
    printf("ok %s\n", flowcl_version());
    return 0;
}
