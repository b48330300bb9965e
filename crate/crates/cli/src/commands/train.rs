use std::collections::BTreeMap;

use fsrc_core::encoder::Trainer;

use crate::artifacts::{self, write_json, Context};
use crate::config::EncoderKindSpec;
use crate::failure::{Failure, Result};
use crate::results::{ResultDoc, TrainDoc};
use crate::TrainArgs;

use super::{input_path, load_pairs};

pub fn run(ctx: &Context, args: &TrainArgs) -> Result<()> {
    if ctx.config.encoder.kind != EncoderKindSpec::Toy {
        return Err(Failure::Config("only the toy encoder trains; a bridged encoder is used frozen".into()));
    }
    let train_path = input_path(ctx, &args.pairs, &artifacts::pairs_file("train"));
    let train = load_pairs(&train_path)?;
    let mut provenance = BTreeMap::new();
    train.provenance("train", &mut provenance);

    let dev_default = ctx.path(&artifacts::pairs_file("dev"));
    let dev_path = args.dev.clone().or_else(|| dev_default.exists().then_some(dev_default));
    let dev = match &dev_path {
        Some(path) => {
            let dev = load_pairs(path)?;
            dev.provenance("dev", &mut provenance);
            dev.records
        }
        None => Vec::new(),
    };

    let init_seed = ctx.seed("encoder/init");
    let train_seed = ctx.seed("train");
    provenance.insert("init_seed".into(), init_seed.to_string());
    provenance.insert("train_seed".into(), train_seed.to_string());
    let config = ctx.config.train.to_core(train_seed);
    let mut trainer = Trainer::new(&train.records, &config, &ctx.config.encoder.toy_params(init_seed), &dev)?;
    for epoch in 0..config.epochs {
        let loss = trainer.run_epoch()?;
        log::info!("epoch {} loss {loss:.6} step {}", epoch + 1, trainer.step());
    }
    let steps = trainer.step();
    let epoch_losses = trainer.epoch_losses().to_vec();
    let (encoder, curve) = trainer.finish();

    let checkpoint_id = encoder.checkpoint_id();
    let ckpt_path = ctx.path(artifacts::CHECKPOINT);
    encoder.save(&ckpt_path)?;
    let meta = ctx.meta("train", &train.corpus_hash(), provenance.clone());
    write_json(&artifacts::meta_path(&ckpt_path), &meta)?;

    let doc = TrainDoc {
        config_hash: ctx.config_hash.clone(),
        corpus_hash: train.corpus_hash(),
        checkpoint_id: checkpoint_id.clone(),
        steps,
        eval_every: config.eval_every,
        epoch_losses,
        curve: curve.points,
        provenance,
    };
    match doc.curve.last() {
        Some(p) => println!("steps {steps} dev_f1 {:.6} checkpoint {checkpoint_id}", p.dev_f1),
        None => println!("steps {steps} checkpoint {checkpoint_id}"),
    }
    write_json(&ctx.path(artifacts::TRAIN), &ResultDoc::Train(doc))
}
