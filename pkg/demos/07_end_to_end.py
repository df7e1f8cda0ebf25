"""Train and evaluate both scenarios on a small synthetic action set.

Scenario 1 melts one template per action from equal temporal snippets;
scenario 2 keeps four key-frame prototypes per action.  Held-out subjects
are classified frame by frame and the video label is the majority vote.
Takes well under a minute; the full-size benchmark lives in the acceptance tests.
"""
import time

from bioaction.pipeline import FeatureExtractor, PipelineConfig, evaluate, split_subjects, train
from bioaction.pipeline.synthetic import make_action_dataset

data = make_action_dataset(seed=0, n_subjects=4, n_sequences=1, n_frames=8, shape=(40, 40))
train_ds, test_ds = split_subjects(data, ["s0", "s1", "s2"])
cfg = PipelineConfig().replace(
    training={"subjects": 3}, attention={"iterations": 30, "particles": 10},
    active_basis={"background_pool": 10}, dataset={"target_width": 40, "target_height": 40})
ex = FeatureExtractor(cfg)
for scenario in (1, 2):
    t0 = time.perf_counter()
    bundle = train(train_ds, cfg.replace(training={"scenario": scenario}), ex)
    ev = evaluate(test_ds, bundle, ex)
    info = bundle.attention_info
    print(f"scenario {scenario}: {bundle.bank.n_rows} prototypes, margin fitness tuned {info['fitness']:.4f} "
          f"vs balanced {info['balanced_fitness']:.4f}, {time.perf_counter() - t0:.0f}s")
    print(ev.videos.to_csv())
