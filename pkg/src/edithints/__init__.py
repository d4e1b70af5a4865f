"""Next-step edit hints for multi-step learning tasks.

Students solving a multi-step task (writing a program, drawing a diagram)
move through a space of states by applying small edits.  Given traces of
past students who reached a correct solution, this package recommends a
single next edit for a new student state: it embeds all states in a
Euclidean space whose distances reproduce the (eigenvalue-corrected) edit
distances, predicts where capable students moved from similar states via
kernel regression, and translates the predicted point back into a concrete
edit by scoring candidate edits taken from shortest edit scripts.

Subpackage layout:

- ``states``:    sequence and tree state values, parsing, canonicalization
- ``editdist``:  edit operations, cost models, string/tree edit distances
                 with edit-script backtrace
- ``traces``:    trace data model, goal-directedness filter, training pairs
- ``space``:     distance embedding: double centering, eigenvalue
                 correction, out-of-sample extension, combination distances
- ``policies``:  hint policies (embedding regression and baselines)
- ``evaluate``:  cross-validated RMSE and tutor-hint-quality harnesses
- ``cli``:       command-line interface (dist / fit / hint / eval / mds)
"""

__version__ = "0.1.0"
