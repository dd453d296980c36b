/*
 * Copyright 2026 The acausal Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <stdio.h>
#include <math.h>
#include "acausal.h"

int main(void) {
  AcOperator *w = NULL;
  if (ac_ocb_process(&w) != AC_STATUS_OK) return 1;
  bool valid = false;
  double forbidden = -1.0;
  if (ac_process_is_valid(w, 1e-9, &valid, &forbidden) != AC_STATUS_OK || !valid) return 2;
  AcSynthesis *s = NULL;
  if (ac_synthesize(w, &s) != AC_STATUS_OK) return 3;
  double p = 0.0;
  ac_synthesis_p_succ(s, &p);
  if (fabs(p - 0.5) > 1e-12) return 4;
  AcOperator *bad = NULL;
  if (ac_operator_from_json("{", &bad) != AC_STATUS_PARSE) return 5;
  if (ac_last_error_message() == NULL) return 6;
  ac_synthesis_free(s);
  ac_operator_free(w);
  printf("p_succ=%.3f\n", p);
  return 0;
}
