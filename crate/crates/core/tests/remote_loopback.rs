mod common;

use std::sync::Arc;

use common::toks;
use twistbeam::bandit::{ConstantTrigger, RemoteTrigger, TriggerPredictor};
use twistbeam::lm::{LanguageModel, LoopbackServer, NgramModel, RemoteProvider};
use twistbeam::Error;

const CORPUS: &str = "the cat sat on the mat .\nthe dog sat on the log .\na cat saw a dog .\n";

fn serve(model: &Arc<NgramModel>, trigger: Option<f64>) -> LoopbackServer {
    let trigger = trigger.map(|p| Arc::new(ConstantTrigger(p)) as Arc<dyn TriggerPredictor>);
    LoopbackServer::start("127.0.0.1:0", model.clone(), trigger).unwrap()
}

#[test]
fn remote_answers_match_in_process_bit_for_bit() {
    let model = Arc::new(NgramModel::train(CORPUS, 3, 0.0).unwrap());
    let server = serve(&model, None);
    let remote = RemoteProvider::new(server.url());
    let prefixes = [
        toks(""),
        toks("the"),
        toks("the cat sat"),
        toks("a zebra"),
        toks("on the"),
    ];
    for prefix in &prefixes {
        for k in [1, 3, model.predictable_size()] {
            let local = model.next_token_distribution(prefix, k).unwrap();
            let far = remote.next_token_distribution(prefix, k).unwrap();
            assert_eq!(local.tokens(), far.tokens());
            let bits = |d: &[f64]| d.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(local.logprobs()), bits(far.logprobs()));
        }
    }
    for (ctx, target) in [("the", "cat sat"), ("", "a cat saw"), ("the", "zebra")] {
        let a = model
            .sequence_perplexity(&toks(ctx), &toks(target))
            .unwrap();
        let b = remote
            .sequence_perplexity(&toks(ctx), &toks(target))
            .unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "{ctx} | {target}");
    }
    assert!(model
        .sequence_perplexity(&toks("the"), &toks("zebra"))
        .unwrap()
        .is_infinite());
}

#[test]
fn trigger_endpoint() {
    let model = Arc::new(NgramModel::train(CORPUS, 2, 0.1).unwrap());
    let with = serve(&model, Some(0.25));
    let t = RemoteTrigger::new(&with.url());
    assert_eq!(t.likelihood(&toks("the cat")).unwrap(), 0.25);

    let without = serve(&model, None);
    let t = RemoteTrigger::new(&without.url());
    assert!(matches!(
        t.likelihood(&toks("the")),
        Err(Error::RemoteProtocol(_))
    ));
}

#[test]
fn transport_and_protocol_failures_are_distinguished() {
    let model = Arc::new(NgramModel::train(CORPUS, 2, 0.1).unwrap());
    let dead = {
        let server = serve(&model, None);
        let url = server.url();
        drop(server);
        url
    };
    let r = RemoteProvider::new(dead).next_token_distribution(&toks("the"), 2);
    assert!(matches!(r, Err(Error::RemoteUnreachable(_))), "{r:?}");

    let server = serve(&model, None);
    let wrong_path = RemoteProvider::new(format!("{}/nested", server.url()));
    assert!(matches!(
        wrong_path.next_token_distribution(&toks("the"), 2),
        Err(Error::RemoteProtocol(_))
    ));
    let zero_k = RemoteProvider::new(server.url()).next_token_distribution(&toks("the"), 0);
    assert!(zero_k.is_err());

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent
        .post(format!("{}/v1/next_token", server.url()))
        .send("not json")
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    let body: serde_json::Value =
        serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap();
    assert!(body["error"].is_string());
    let resp = agent
        .get(format!("{}/v1/next_token", server.url()))
        .call()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 405);
}

#[test]
fn concurrent_clients() {
    let model = Arc::new(NgramModel::train(CORPUS, 2, 0.1).unwrap());
    let server = serve(&model, None);
    let url = server.url();
    std::thread::scope(|s| {
        for i in 0..8 {
            let url = url.clone();
            let model = model.clone();
            s.spawn(move || {
                let remote = RemoteProvider::new(url);
                let prefix = if i % 2 == 0 {
                    toks("the")
                } else {
                    toks("a cat")
                };
                for _ in 0..20 {
                    assert_eq!(
                        remote.next_token_distribution(&prefix, 4).unwrap(),
                        model.next_token_distribution(&prefix, 4).unwrap()
                    );
                }
            });
        }
    });
}
