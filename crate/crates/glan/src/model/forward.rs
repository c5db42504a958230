//! Prepared per-graph inputs and the whole-pipeline forward pass: token ids
//! and neighbor lists for one set of cascades, class probabilities for any
//! subset of its tweets, and checkpoint-driven prediction.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::checkpoint::Checkpoint;
use super::features::{user_feature_matrix, FeatureStats};
use super::{batch_loss, classify, Ablation, GlanParams, ModelResult, TrainConfig};
use crate::attention::AttnScale;
use crate::data::{encode_text, Corpus, HeteroGraph, Label, Vocab};
use crate::global_encoding::{
    compose_nodes, encode_global, neighbor_lists, NodeStore, MAX_NEIGHBORS,
};
use crate::local_encoding::{encode_local, MAX_RETWEETS};
use crate::model::ModelError;
use crate::numerics::{
    grad_check, Bindings, GradCheckConfig, GradCheckReport, Real, Tape, Tensor, Var,
};
use crate::text_encoder::encode_microblog;

/// One set of cascades made forward-ready: the tweet–user graph, capped
/// neighbor lists, and fixed-length token ids for every source and retweet.
/// Graph tweet `t` corresponds to cascade `members[t]` of the source corpus.
#[derive(Clone, Debug)]
pub struct ViewData {
    pub graph: HeteroGraph,
    pub members: Vec<usize>,
    pub tweet_neighbors: Vec<Vec<usize>>,
    pub user_neighbors: Vec<Vec<usize>>,
    pub source_ids: Vec<Vec<usize>>,
    pub retweet_ids: Vec<Vec<Vec<usize>>>,
}

/// Encode the cascades at `members` (indices into `corpus.cascades`).
/// Retweet lists keep at most [`MAX_RETWEETS`] of the most recent posts;
/// neighbor lists keep at most [`MAX_NEIGHBORS`] of the most active.
pub fn build_view(
    corpus: &Corpus,
    members: &[usize],
    vocab: &Vocab,
    text_len: usize,
) -> ViewData {
    let cascades: Vec<_> = members.iter().map(|&i| &corpus.cascades[i]).collect();
    let graph = HeteroGraph::build(cascades.iter().copied());
    let (tweet_neighbors, user_neighbors) = neighbor_lists(&graph, MAX_NEIGHBORS);
    let source_ids = cascades
        .iter()
        .map(|c| encode_text(&c.source.text, vocab, text_len))
        .collect();
    let retweet_ids = cascades
        .iter()
        .map(|c| {
            let skip = c.retweets.len().saturating_sub(MAX_RETWEETS);
            c.retweets[skip..]
                .iter()
                .map(|r| encode_text(&r.text, vocab, text_len))
                .collect()
        })
        .collect();
    ViewData {
        graph,
        members: members.to_vec(),
        tweet_neighbors,
        user_neighbors,
        source_ids,
        retweet_ids,
    }
}

/// Everything one forward pass reads. `store` must be row-aligned to
/// `view.graph` (the trainable store during training, a remapped copy when
/// evaluating a different graph).
pub struct ForwardCtx<'a, T: Real> {
    pub params: &'a GlanParams<T>,
    pub store: &'a NodeStore<T>,
    pub view: &'a ViewData,
    pub uf: &'a Tensor<T>,
    pub ablation: Ablation,
    pub scale: AttnScale,
}

/// Class-probability variables for `targets` (graph tweet indices).
/// Parameters actually used under the ablation are recorded in `reg`.
pub fn forward_probs<T: Real>(
    tape: &Tape<T>,
    ctx: &ForwardCtx<'_, T>,
    targets: &[usize],
    reg: &mut Bindings,
) -> ModelResult<Vec<Var>> {
    let text = ctx.params.text.bind(tape, "text", reg);
    let local = ctx
        .ablation
        .uses_lre()
        .then(|| ctx.params.local.bind(tape, "local", reg));
    let head = ctx.params.bind_head(tape, "head", reg);

    let m_tilde = |t: usize| -> ModelResult<Var> {
        match &local {
            Some(local) => Ok(encode_local(
                tape,
                &text,
                local,
                &ctx.view.source_ids[t],
                &ctx.view.retweet_ids[t],
                ctx.scale,
                None,
            )?),
            None => Ok(encode_microblog(tape, &text, &ctx.view.source_ids[t])?),
        }
    };

    if ctx.ablation.uses_gre() {
        let global = ctx.params.global.bind(tape, "global", reg);
        let store = ctx.store.bind(tape, "store", reg);
        let rows: Vec<Var> = (0..ctx.view.graph.n_tweets())
            .map(m_tilde)
            .collect::<ModelResult<_>>()?;
        let m_mat = tape.concat_rows(&rows);
        let m_composed = compose_nodes(tape, store.m0, m_mat);
        let uf = tape.leaf(ctx.uf.clone());
        let u_composed = compose_nodes(tape, store.u0, uf);
        let (m_global, _) = encode_global(
            tape,
            &global,
            m_composed,
            u_composed,
            &ctx.view.tweet_neighbors,
            &ctx.view.user_neighbors,
        )?;
        Ok(targets
            .iter()
            .map(|&t| classify(tape, rows[t], tape.select_row(m_global, t), &head))
            .collect())
    } else {
        let zero = tape.leaf(Tensor::zeros(vec![ctx.params.model_dim()]));
        targets
            .iter()
            .map(|&t| Ok(classify(tape, m_tilde(t)?, zero, &head)))
            .collect()
    }
}

/// Forward-only probabilities for `targets`, as plain floats.
pub fn predict_probs<T: Real>(
    ctx: &ForwardCtx<'_, T>,
    targets: &[usize],
) -> ModelResult<Vec<Vec<f64>>> {
    let tape = Tape::forward_only();
    let vars = forward_probs(&tape, ctx, targets, &mut Bindings::new())?;
    Ok(vars
        .into_iter()
        .map(|v| tape.value(v).data().iter().map(|p| p.to_f64()).collect())
        .collect())
}

/// Index of the largest probability; ties resolve to the lower class index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// One classified cascade.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub tweet_id: String,
    pub label: Label,
    pub probs: Vec<f64>,
}

/// Classify every cascade of `corpus` under a trained checkpoint. Tweets and
/// users unseen at training time contribute zero free vectors; users keep
/// their static features. Returns predictions in cascade order.
pub fn predict<T: Real>(ckpt: &Checkpoint<T>, corpus: &Corpus) -> ModelResult<Vec<Prediction>> {
    if ckpt.params.text.vocab_size() != ckpt.vocab.len() {
        return Err(ModelError::VocabMismatch {
            params: ckpt.params.text.vocab_size(),
            vocab: ckpt.vocab.len(),
        });
    }
    let members: Vec<usize> = (0..corpus.cascades.len()).collect();
    let view = build_view(corpus, &members, &ckpt.vocab, ckpt.config.text_len);
    let store = remap_store(ckpt, &view.graph);
    let records: HashMap<&str, &crate::data::UserRecord> =
        corpus.users.iter().map(|u| (u.id.as_str(), u)).collect();
    let uf: Tensor<T> = user_feature_matrix(
        view.graph.user_ids(),
        &records,
        &ckpt.stats,
        ckpt.config.d_u,
        ckpt.config.seed,
    );
    let ctx = ForwardCtx {
        params: &ckpt.params,
        store: &store,
        view: &view,
        uf: &uf,
        ablation: ckpt.config.ablation,
        scale: ckpt.config.scale,
    };
    let probs = predict_probs(&ctx, &members)?;
    let classes = ckpt.label_set.classes();
    Ok(probs
        .into_iter()
        .enumerate()
        .map(|(t, p)| Prediction {
            tweet_id: view.graph.tweet_id(t).to_string(),
            label: classes[argmax(&p)],
            probs: p,
        })
        .collect())
}

/// Free node vectors for an evaluation graph: rows copied from the trained
/// store where ids match, zero elsewhere.
fn remap_store<T: Real>(ckpt: &Checkpoint<T>, graph: &HeteroGraph) -> NodeStore<T> {
    let d = ckpt.params.store.m0.shape()[1];
    let d_u = ckpt.params.store.u0.shape()[1];
    let mut store = NodeStore::zeros(graph.n_tweets(), graph.n_users(), d, d_u);
    let tweet_rows: HashMap<&str, usize> = ckpt
        .tweet_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    for t in 0..graph.n_tweets() {
        if let Some(&row) = tweet_rows.get(graph.tweet_id(t)) {
            store.m0.data_mut()[t * d..(t + 1) * d]
                .copy_from_slice(&ckpt.params.store.m0.row(row)[..]);
        }
    }
    let user_rows: HashMap<&str, usize> = ckpt
        .user_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    for u in 0..graph.n_users() {
        if let Some(&row) = user_rows.get(graph.user_id(u)) {
            store.u0.data_mut()[u * d_u..(u + 1) * d_u]
                .copy_from_slice(&ckpt.params.store.u0.row(row)[..]);
        }
    }
    store
}

/// Whole-pipeline finite-difference gradient check on a small corpus: every
/// cascade is a target, the loss is the batch NLL, and every parameter group
/// (free node vectors included) is perturbed. 64-bit only; the corpus should
/// be tiny, since cost scales with parameter count times forward cost.
pub fn grad_check_end_to_end(
    corpus: &Corpus,
    cfg: &TrainConfig,
) -> ModelResult<GradCheckReport> {
    cfg.validate()?;
    let texts = corpus.cascades.iter().flat_map(|c| {
        std::iter::once(c.source.text.as_str())
            .chain(c.retweets.iter().map(|r| r.text.as_str()))
    });
    let vocab = Vocab::build(texts, cfg.min_count);
    let members: Vec<usize> = (0..corpus.cascades.len()).collect();
    let view = build_view(corpus, &members, &vocab, cfg.text_len);
    let golds: Vec<usize> = corpus
        .cascades
        .iter()
        .map(|c| {
            corpus
                .label_set
                .class_index(c.label)
                .expect("a corpus label set covers its own labels")
        })
        .collect();
    let records: HashMap<&str, &crate::data::UserRecord> =
        corpus.users.iter().map(|u| (u.id.as_str(), u)).collect();
    let stats = FeatureStats::fit(corpus.users.iter().filter_map(|u| u.features.as_deref()));
    let uf: Tensor<f64> =
        user_feature_matrix(view.graph.user_ids(), &records, &stats, cfg.d_u, cfg.seed);

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut params: GlanParams<f64> = GlanParams::init(
        cfg,
        vocab.len(),
        view.graph.n_tweets(),
        view.graph.n_users(),
        corpus.label_set.n_classes(),
        &mut rng,
    )?;
    let targets: Vec<usize> = (0..view.graph.n_tweets()).collect();

    let run = |params: &GlanParams<f64>,
               tape: &Tape<f64>,
               reg: &mut Bindings|
     -> ModelResult<Var> {
        let ctx = ForwardCtx {
            params,
            store: &params.store,
            view: &view,
            uf: &uf,
            ablation: cfg.ablation,
            scale: cfg.scale,
        };
        let probs = forward_probs(tape, &ctx, &targets, reg)?;
        Ok(batch_loss(tape, &probs, &golds))
    };

    let tape = Tape::new();
    let mut reg = Bindings::new();
    let loss = run(&params, &tape, &mut reg)?;
    let mut grads = tape.backward(loss);
    let analytic = reg.grads(&mut grads);

    Ok(grad_check(
        &mut params,
        &analytic,
        |p| {
            let tape = Tape::forward_only();
            let mut reg = Bindings::new();
            let loss = run(p, &tape, &mut reg)
                .expect("forward pass failed inside finite differences");
            tape.value(loss).item()
        },
        &GradCheckConfig::default(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Cascade, LabelSet, Post, SyntheticConfig};
    use crate::model::{FeatureStats, TrainConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn small_corpus(seed: u64) -> Corpus {
        generate_synthetic(&SyntheticConfig {
            n_cascades: 12,
            n_users: 8,
            vocab_size: 20,
            structure_signal: true,
            text_signal: true,
            seed,
        })
        .unwrap()
    }

    fn vocab_of(corpus: &Corpus) -> Vocab {
        let texts = corpus.cascades.iter().flat_map(|c| {
            std::iter::once(c.source.text.as_str())
                .chain(c.retweets.iter().map(|r| r.text.as_str()))
        });
        Vocab::build(texts, 1)
    }

    fn checkpoint_for(corpus: &Corpus, cfg: TrainConfig, seed: u64) -> Checkpoint<f64> {
        let vocab = vocab_of(corpus);
        let members: Vec<usize> = (0..corpus.cascades.len()).collect();
        let view = build_view(corpus, &members, &vocab, cfg.text_len);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let params = GlanParams::init(
            &cfg,
            vocab.len(),
            view.graph.n_tweets(),
            view.graph.n_users(),
            corpus.label_set.n_classes(),
            &mut rng,
        )
        .unwrap();
        Checkpoint {
            config: cfg,
            label_set: corpus.label_set,
            tweet_ids: (0..view.graph.n_tweets())
                .map(|t| view.graph.tweet_id(t).to_string())
                .collect(),
            user_ids: view.graph.user_ids().to_vec(),
            stats: FeatureStats::default(),
            vocab,
            params,
        }
    }

    #[test]
    fn probabilities_sum_to_one_for_every_ablation() {
        let corpus = small_corpus(5);
        for ablation in Ablation::ALL {
            let mut cfg = TrainConfig::small();
            cfg.ablation = ablation;
            let ckpt = checkpoint_for(&corpus, cfg, 11);
            let preds = predict(&ckpt, &corpus).unwrap();
            assert_eq!(preds.len(), corpus.n_cascades());
            for p in &preds {
                let total: f64 = p.probs.iter().sum();
                assert!((total - 1.0).abs() < 1e-9, "{ablation}: {total}");
                assert_eq!(p.probs.len(), 2);
            }
        }
    }

    #[test]
    fn uniform_probabilities_break_ties_to_the_first_class() {
        let corpus = small_corpus(6);
        let mut ckpt = checkpoint_for(&corpus, TrainConfig::small(), 12);
        ckpt.params.head_w = Tensor::zeros(ckpt.params.head_w.shape().to_vec());
        ckpt.params.head_b = Tensor::zeros(ckpt.params.head_b.shape().to_vec());
        let preds = predict(&ckpt, &corpus).unwrap();
        for p in &preds {
            assert_eq!(p.label, LabelSet::Binary.classes()[0]);
            assert!((p.probs[0] - 0.5).abs() < 1e-12);
        }
        assert_eq!(argmax(&[0.3, 0.4, 0.3]), 1);
        assert_eq!(argmax(&[0.4, 0.2, 0.4]), 0);
    }

    fn relabel_retweet_authors(corpus: &Corpus) -> Corpus {
        let mut out = corpus.clone();
        for c in &mut out.cascades {
            for (k, r) in c.retweets.iter_mut().enumerate() {
                r.author = format!("other{k}");
            }
        }
        out
    }

    fn rewrite_retweet_texts(corpus: &Corpus) -> Corpus {
        let mut out = corpus.clone();
        for c in &mut out.cascades {
            for r in &mut c.retweets {
                r.text = "w0 w1 w0".to_string();
            }
        }
        out
    }

    #[test]
    fn no_gre_ignores_graph_structure_and_full_does_not() {
        let corpus = small_corpus(7);
        let rewired = relabel_retweet_authors(&corpus);

        let mut cfg = TrainConfig::small();
        cfg.ablation = Ablation::NoGre;
        let ckpt = checkpoint_for(&corpus, cfg, 13);
        let base = predict(&ckpt, &corpus).unwrap();
        let moved = predict(&ckpt, &rewired).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            assert_eq!(a.probs, b.probs);
        }

        let ckpt = checkpoint_for(&corpus, TrainConfig::small(), 13);
        let base = predict(&ckpt, &corpus).unwrap();
        let moved = predict(&ckpt, &rewired).unwrap();
        assert!(base.iter().zip(&moved).any(|(a, b)| a.probs != b.probs));
    }

    #[test]
    fn no_lre_ignores_retweet_texts_and_full_does_not() {
        let corpus = small_corpus(8);
        let rewritten = rewrite_retweet_texts(&corpus);

        let mut cfg = TrainConfig::small();
        cfg.ablation = Ablation::NoLre;
        let ckpt = checkpoint_for(&corpus, cfg, 14);
        let base = predict(&ckpt, &corpus).unwrap();
        let changed = predict(&ckpt, &rewritten).unwrap();
        for (a, b) in base.iter().zip(&changed) {
            assert_eq!(a.probs, b.probs);
        }

        let ckpt = checkpoint_for(&corpus, TrainConfig::small(), 14);
        let base = predict(&ckpt, &corpus).unwrap();
        let changed = predict(&ckpt, &rewritten).unwrap();
        assert!(base.iter().zip(&changed).any(|(a, b)| a.probs != b.probs));
    }

    #[test]
    fn view_keeps_only_the_most_recent_retweets() {
        let retweets: Vec<Post> = (0..MAX_RETWEETS + 5)
            .map(|k| Post {
                id: format!("r{k}"),
                author: format!("u{}", k % 3),
                text: format!("w{k}"),
                ts: 1000 + k as i64,
            })
            .collect();
        let corpus = Corpus {
            cascades: vec![Cascade {
                source: Post {
                    id: "t0".into(),
                    author: "u0".into(),
                    text: "w0 w1".into(),
                    ts: 1000,
                },
                retweets,
                label: Label::FR,
            }],
            users: Vec::new(),
            label_set: LabelSet::Binary,
        };
        let vocab = vocab_of(&corpus);
        let view = build_view(&corpus, &[0], &vocab, 6);
        assert_eq!(view.retweet_ids[0].len(), MAX_RETWEETS);
        // The oldest five retweets fall off; the first kept one is r5.
        let first_kept = *view.retweet_ids[0][0].last().unwrap();
        assert_eq!(first_kept, vocab.token_id("w5"));
        // The graph still sees every participant.
        assert_eq!(view.graph.n_users(), 3);
        assert_eq!(view.source_ids[0].len(), 6);
    }

    #[test]
    fn unseen_tweets_and_users_get_zero_free_vectors() {
        let corpus = small_corpus(9);
        let mut ckpt = checkpoint_for(&corpus, TrainConfig::small(), 15);
        // Make stored rows visibly nonzero.
        ckpt.params.store.m0 = Tensor::filled(ckpt.params.store.m0.shape().to_vec(), 0.5);
        ckpt.params.store.u0 = Tensor::filled(ckpt.params.store.u0.shape().to_vec(), -0.25);

        let mut extended = corpus.clone();
        let mut extra = corpus.cascades[0].clone();
        extra.source.id = "brand_new_tweet".into();
        extra.source.author = "brand_new_user".into();
        extended.cascades.push(extra);

        let members: Vec<usize> = (0..extended.cascades.len()).collect();
        let view = build_view(&extended, &members, &ckpt.vocab, ckpt.config.text_len);
        let store = remap_store(&ckpt, &view.graph);
        let new_tweet = view.graph.n_tweets() - 1;
        assert!(store.m0.row(new_tweet).iter().all(|&x| x == 0.0));
        assert!(store.m0.row(0).iter().all(|&x| x == 0.5));
        let new_user = view.graph.user_index("brand_new_user").unwrap();
        assert!(store.u0.row(new_user).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vocabulary_mismatch_is_rejected() {
        let corpus = small_corpus(10);
        let mut ckpt = checkpoint_for(&corpus, TrainConfig::small(), 16);
        ckpt.vocab = Vocab::from_tokens(vec!["only".into()]);
        let err = predict(&ckpt, &corpus).unwrap_err();
        assert!(matches!(err, ModelError::VocabMismatch { .. }));
    }

    #[test]
    fn whole_pipeline_gradients_match_finite_differences() {
        let corpus = generate_synthetic(&SyntheticConfig {
            n_cascades: 3,
            n_users: 4,
            vocab_size: 10,
            structure_signal: true,
            text_signal: true,
            seed: 21,
        })
        .unwrap();
        let mut cfg = TrainConfig::small();
        cfg.d = 8;
        cfg.d_u = 4;
        cfg.text_len = 6;
        cfg.kernel_widths = vec![2, 3];
        cfg.filters_per_width = 4;
        cfg.local_heads = 2;
        cfg.global_heads = 2;
        cfg.rounds = 1;
        let report = grad_check_end_to_end(&corpus, &cfg).unwrap();
        assert!(report.checked > 500, "only {} entries checked", report.checked);
        assert!(report.passed(), "{report}");
    }
}
