#include "chronotag/pipeline.hpp"

#include "chronotag/errors.hpp"

namespace chronotag {

ExperimentData prepare_data(std::vector<DatedSentence> corpus, const DataOptions& options) {
  if (corpus.empty()) throw DataError("corpus is empty");
  for (const auto& s : corpus) validate(s, options.years);
  const Rng root(options.seed);
  Rng split_rng = root.fork("split");
  ExperimentData d;
  d.split = split(truncate(std::move(corpus), options.max_len), options.train_fraction, split_rng);
  d.vocab = build_vocab(d.split.train, options.vocab_cap);
  d.tags = build_tagset(d.split.train);
  WordTableOptions wo;
  wo.oov_stddev = options.oov_stddev;
  d.words = std::make_shared<const WordTable>(load_word_table(options.embeddings, d.vocab, options.word_dim,
                                                              root.fork("embeddings"), wo, &d.warnings));
  d.train = encode_all(d.split.train, d.vocab, d.tags);
  d.test = encode_all(d.split.test, d.vocab, d.tags);
  return d;
}

TrainedModel train_model(const ExperimentData& data, ModelConfig config, YearRange years, const TrainConfig& train,
                         const ProgressFn& progress) {
  config.tag_count = data.tags.size();
  config.word_dim = data.words->dim();
  Rng init = Rng(train.seed).fork("init");
  TrainedModel m;
  m.config = config;
  m.params = init_params(config, data.words, years, init);
  m.report = chronotag::train(m.params, config, data.train, data.test, train, progress);
  return m;
}

}  // namespace chronotag
