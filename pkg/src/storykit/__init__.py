"""storykit: controllable story-continuation toolkit."""

from .autodiff import (AdamState, LstmWeights, Tensor, adam_step, backward,
                       grad_check, lstm_cell, no_grad)
from .corpus import (Annotation, FrameInventory, Lexicons, Story, Vocabulary,
                     annotate_sentence, annotate_story, bin_length, build_vocab,
                     load_corpus, read_sidecar, write_sidecar)
from .decoding import (GenerationItem, GenerationList, apply_temperature,
                       beam_search, generate_per_attribute, greedy,
                       temperature_sample)
from .metrics import bleu2, max_and_avg, rouge, self_bleu
from .model import (AttributeEmbedder, ModelConfig, Resources, Seq2SeqModel,
                    TrainConfig, make_examples, train_model)
from .numerics import (ClusterModel, EmbeddingTable, PcaProjection, bow_embed,
                       fit_pca, kmeans, predicate_vector)
from .selection import (Candidate, FramePredictor, frame_vector,
                        predict_topk_frames, rerank, train_frame_predictor)

__version__ = "0.1.0"
