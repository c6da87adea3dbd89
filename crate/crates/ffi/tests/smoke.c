#include <math.h>
#include <stdio.h>
#include "vibaug.h"

int main(void) {
    VbMolecule *m = NULL;
    if (vb_molecule_parse_xyz("2\nN2\nN 0 0 0.5488\nN 0 0 -0.5488", &m) != VB_STATUS_OK) return 1;
    size_t n = 0;
    vb_molecule_atom_count(m, &n);
    if (n != 2) return 2;
    double a = 0.0;
    if (vb_max_amplitude(1.0, 298.15, &a) != VB_STATUS_OK || fabs(a - 0.090735) > 1e-5) return 3;
    VbMolecule *bad = NULL;
    if (vb_molecule_parse_xyz("2\nX\nQq 0 0 0\nH 1 0 0", &bad) != VB_STATUS_PARSE_ERROR) return 4;
    char msg[128];
    vb_last_error_message(msg, sizeof msg);
    printf("%s\n", msg);
    vb_molecule_free(m);
    return 0;
}
